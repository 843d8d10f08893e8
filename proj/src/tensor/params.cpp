#include "climdown/tensor/params.hpp"

#include <algorithm>
#include <cmath>

#include "climdown/error.hpp"

namespace climdown::tensor {

Tensor ParameterSet::add(const std::string& name, const Tensor& t) {
  for (const auto& p : params_) {
    if (p.name == name) throw ValidationError("duplicate parameter name '" + name + "'");
  }
  auto leaf = Tensor::from(t.shape(), std::vector<double>(t.data().begin(), t.data().end()), true);
  params_.push_back({name, leaf});
  return leaf;
}

BatchNormState& ParameterSet::add_batch_norm(const std::string& name, std::size_t channels) {
  auto& st = bn_.emplace_back(channels);
  buffers_.push_back({name + ".running_mean", &st.running_mean});
  buffers_.push_back({name + ".running_var", &st.running_var});
  return st;
}

std::vector<double>& ParameterSet::add_buffer(const std::string& name, std::vector<double> init) {
  auto& v = plain_.emplace_back(std::move(init));
  buffers_.push_back({name, &v});
  return v;
}

std::vector<Tensor> ParameterSet::tensors() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.tensor);
  return out;
}

const Tensor& ParameterSet::get(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return p.tensor;
  }
  throw ValidationError("no parameter named '" + name + "'");
}

std::size_t ParameterSet::count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.size();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) {
    auto t = p.tensor;
    t.zero_grad();
  }
}

std::vector<double> ParameterSet::flat_values() const {
  std::vector<double> out;
  for (const auto& p : params_) out.insert(out.end(), p.tensor.data().begin(), p.tensor.data().end());
  for (const auto& b : buffers_) out.insert(out.end(), b.values->begin(), b.values->end());
  return out;
}

void ParameterSet::set_flat_values(std::span<const double> v) {
  std::size_t total = 0;
  for (const auto& p : params_) total += p.tensor.data().size();
  for (const auto& b : buffers_) total += b.values->size();
  if (v.size() != total) throw ValidationError("parameter snapshot has the wrong size");
  std::size_t off = 0;
  for (const auto& p : params_) {
    Tensor t = p.tensor;
    auto dst = t.mutable_data();
    std::copy(v.begin() + static_cast<std::ptrdiff_t>(off),
              v.begin() + static_cast<std::ptrdiff_t>(off + dst.size()), dst.begin());
    off += dst.size();
  }
  for (const auto& b : buffers_) {
    std::copy(v.begin() + static_cast<std::ptrdiff_t>(off),
              v.begin() + static_cast<std::ptrdiff_t>(off + b.values->size()), b.values->begin());
    off += b.values->size();
  }
}

Tensor he_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::vector<double> v(numel(shape));
  for (double& x : v) x = rng.uniform(-a, a);
  return Tensor::from(std::move(shape), std::move(v));
}

Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> v(numel(shape));
  for (double& x : v) x = rng.uniform(-a, a);
  return Tensor::from(std::move(shape), std::move(v));
}

}  // namespace climdown::tensor
