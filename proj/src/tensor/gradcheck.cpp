#include "climdown/tensor/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "climdown/error.hpp"

namespace climdown::tensor {

GradCheckResult grad_check(const std::function<Tensor()>& f, std::vector<Tensor> params,
                           double eps, double floor) {
  for (auto& p : params) {
    if (!p.requires_grad()) throw ValidationError("grad_check: parameter without gradient");
    p.zero_grad();
  }
  std::uint64_t base_sig;
  {
    KinkRecorder rec;
    auto out = f();
    out.backward();
    base_sig = rec.signature();
  }
  std::vector<std::vector<double>> analytic;
  for (const auto& p : params) analytic.emplace_back(p.grad().begin(), p.grad().end());

  auto eval = [&](std::uint64_t& sig) {
    NoGradGuard ng;
    KinkRecorder rec;
    const double v = f().item();
    sig = rec.signature();
    return v;
  };

  GradCheckResult res;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto values = params[k].mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double orig = values[i];
      std::uint64_t sp, sm;
      values[i] = orig + eps;
      const double fp = eval(sp);
      values[i] = orig - eps;
      const double fm = eval(sm);
      values[i] = orig;
      if (sp != base_sig || sm != base_sig) {
        ++res.skipped;
        continue;
      }
      const double num = (fp - fm) / (2.0 * eps);
      const double a = analytic[k][i];
      const double rel = std::fabs(a - num) / std::max({std::fabs(a), std::fabs(num), floor});
      ++res.checked;
      if (rel > res.max_rel_error) {
        res.max_rel_error = rel;
        res.worst_param = k;
        res.worst_index = i;
        res.worst_analytic = a;
        res.worst_numeric = num;
      }
    }
  }
  return res;
}

}  // namespace climdown::tensor
