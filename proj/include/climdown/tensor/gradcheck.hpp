#pragma once

#include <functional>
#include <string>
#include <vector>

#include "climdown/tensor/tensor.hpp"

namespace climdown::tensor {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  /// Coordinates whose +-eps stencil changed a relu on/off pattern; not compared.
  std::size_t skipped = 0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Compares backward() of the scalar `f()` with central differences on every coordinate
/// of `params`. Relative error is |a - n| / max(|a|, |n|, floor).
GradCheckResult grad_check(const std::function<Tensor()>& f, std::vector<Tensor> params,
                           double eps = 1e-5, double floor = 1e-6);

}  // namespace climdown::tensor
