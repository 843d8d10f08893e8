#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "climdown/tensor/params.hpp"

namespace climdown::tensor {

/// p -= lr * g
void sgd_step(std::span<double> p, std::span<const double> g, double lr);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};
/// One bias-corrected Adam update; `step` is the 1-based count including this update.
void adam_step(std::span<double> p, std::span<const double> g, std::span<double> m,
               std::span<double> v, std::uint64_t step, const AdamConfig& cfg);

enum class OptimizerKind { kSgd, kAdam };
std::string_view to_string(OptimizerKind k);
OptimizerKind parse_optimizer(std::string_view s);

/// Optimizer over a fixed list of parameters. Adam moments are allocated per parameter.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double lr, std::vector<Tensor> params);

  void step();
  void zero_grad();

  OptimizerKind kind() const { return kind_; }
  std::uint64_t steps() const { return step_; }
  double lr() const { return cfg_.lr; }
  void set_lr(double lr) { cfg_.lr = lr; }

 private:
  OptimizerKind kind_;
  AdamConfig cfg_;
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  std::uint64_t step_ = 0;
};

}  // namespace climdown::tensor
