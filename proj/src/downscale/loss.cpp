#include "climdown/downscale/loss.hpp"

#include <algorithm>
#include <cmath>

#include "climdown/tensor/ops.hpp"

namespace climdown::downscale {

std::vector<double> imbalance_weights(std::span<const double> target, double alpha) {
  std::vector<double> w(target.size(), 1.0);
  if (target.empty() || alpha == 0.0) return w;
  double mean = 0.0;
  for (double v : target) mean += v;
  mean /= static_cast<double>(target.size());
  double ss = 0.0;
  for (double v : target) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(target.size()));
  if (!(sd > 0.0)) return w;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double z = (target[i] - mean) / sd;
    w[i] = 1.0 + alpha * std::max(0.0, std::fabs(z) - 1.0);
  }
  return w;
}

tensor::Tensor imbalance_weighted_mse(const tensor::Tensor& pred, const tensor::Tensor& target, double alpha) {
  auto w = imbalance_weights(target.data(), alpha);
  if (std::all_of(w.begin(), w.end(), [](double v) { return v == 1.0; })) return tensor::mse(pred, target);
  return tensor::weighted_mse(pred, target, w);
}

}  // namespace climdown::downscale
