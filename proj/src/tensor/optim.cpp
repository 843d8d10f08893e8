#include "climdown/tensor/optim.hpp"

#include <cmath>

#include "climdown/error.hpp"

namespace climdown::tensor {

void sgd_step(std::span<double> p, std::span<const double> g, double lr) {
  for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
}

void adam_step(std::span<double> p, std::span<const double> g, std::span<double> m,
               std::span<double> v, std::uint64_t step, const AdamConfig& cfg) {
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
    const double mh = m[i] / c1;
    const double vh = v[i] / c2;
    p[i] -= cfg.lr * mh / (std::sqrt(vh) + cfg.eps);
  }
}

std::string_view to_string(OptimizerKind k) { return k == OptimizerKind::kSgd ? "sgd" : "adam"; }

OptimizerKind parse_optimizer(std::string_view s) {
  if (s == "sgd") return OptimizerKind::kSgd;
  if (s == "adam") return OptimizerKind::kAdam;
  throw ValidationError("unknown optimizer '" + std::string(s) + "'");
}

Optimizer::Optimizer(OptimizerKind kind, double lr, std::vector<Tensor> params)
    : kind_(kind), params_(std::move(params)) {
  if (!(lr > 0.0)) throw ValidationError("optimizer: learning rate must be positive");
  cfg_.lr = lr;
  if (kind_ == OptimizerKind::kAdam) {
    for (const auto& p : params_) {
      m_.emplace_back(p.size(), 0.0);
      v_.emplace_back(p.size(), 0.0);
    }
  }
}

void Optimizer::step() {
  ++step_;
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& p = params_[k];
    if (kind_ == OptimizerKind::kSgd) {
      sgd_step(p.mutable_data(), p.grad(), cfg_.lr);
    } else {
      adam_step(p.mutable_data(), p.grad(), m_[k], v_[k], step_, cfg_);
    }
  }
}

void Optimizer::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace climdown::tensor
