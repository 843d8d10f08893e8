#pragma once

#include <span>
#include <vector>

#include "climdown/tensor/tensor.hpp"

namespace climdown::downscale {

/// w = 1 + alpha * max(0, |z| - 1), z the target standardised over the whole batch.
/// A constant target gives w = 1 everywhere.
std::vector<double> imbalance_weights(std::span<const double> target, double alpha);

/// mean(w * (pred - target)^2) with the weights above held constant.
tensor::Tensor imbalance_weighted_mse(const tensor::Tensor& pred, const tensor::Tensor& target, double alpha);

}  // namespace climdown::downscale
