#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include "climdown/geogrid/gcf.hpp"
#include "climdown/geogrid/ops.hpp"
#include "climdown/metrics/metrics.hpp"
#include "climdown/pipeline/stages.hpp"
#include "climdown/ranking/topsis.hpp"
#include "climdown/rng.hpp"
#include "climdown/tensor/gradcheck.hpp"
#include "climdown/tensor/ops.hpp"

namespace climdown::pipeline {

namespace {

using geogrid::DataCube;
using geogrid::GridAxis;

SelfCheck check_regrid() {
  const DataCube src(GridAxis::latitude({0, 1}), GridAxis::longitude({0, 1}), {{2000, 1, 1}},
                     geogrid::Calendar::kStandard, "tas", "degC", {0, 1, 2, 3});
  const auto out = geogrid::regrid_bilinear(src, GridAxis::latitude({0.5}), GridAxis::longitude({0.5}));
  return {"regrid centre point", out.at(0, 0, 0) == 1.5, "got " + std::to_string(out.at(0, 0, 0))};
}

SelfCheck check_metrics() {
  Rng rng(1);
  std::vector<double> v(64);
  for (auto& x : v) x = 10.0 + rng.normal();
  const auto r = metrics::compute_report(metrics::PooledSample(v, v));
  using metrics::MetricId;
  const bool ok = r.raw(MetricId::kBias) == 0.0 && r.raw(MetricId::kRmse) == 0.0 &&
                  std::abs(*r.get(MetricId::kR) - 1.0) <= 1e-12 &&
                  std::abs(*r.get(MetricId::kNse) - 1.0) <= 1e-12 &&
                  std::abs(*r.get(MetricId::kKge) - 1.0) <= 1e-12 &&
                  std::abs(r.raw(MetricId::kPdfOverlap) - 1.0) <= 1e-12;
  return {"perfect-model metrics", ok, ""};
}

SelfCheck check_topsis() {
  ranking::DecisionMatrix c;
  c.models = {"A", "B", "C"};
  c.criteria = {ranking::criterion(metrics::MetricId::kNse), ranking::criterion(metrics::MetricId::kKge)};
  c.values = {1, 1, 0.5, 0.5, 0, 0};
  const auto r = ranking::topsis(c, ranking::uniform_weights(2));
  const bool ok = r.scores[0].cc == 1.0 && r.scores[1].cc == 0.5 && r.scores[2].cc == 0.0;
  return {"topsis 3x2 case", ok, ""};
}

SelfCheck check_gcf() {
  Rng rng(5);
  std::vector<double> v(2 * 3 * 4);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  v[7] = geogrid::kDefaultFill;
  const DataCube cube(GridAxis::latitude({40, 41, 42}), GridAxis::longitude({0, 1, 2, 3}),
                      {{2001, 2, 28}, {2001, 3, 1}}, geogrid::Calendar::kNoLeap, "tasmin", "degC", v);
  const auto dir = std::filesystem::temp_directory_path() /
                   ("climdown-selftest-" + std::to_string(Rng(std::random_device{}()).next_u64()));
  bool ok = false;
  std::string detail;
  try {
    geogrid::write_cube(cube, dir);
    ok = geogrid::read_cube(dir) == cube;
  } catch (const std::exception& e) {
    detail = e.what();
  }
  std::error_code ec;
  std::filesystem::remove_all(dir, ec);
  return {"gcf round trip", ok, detail};
}

SelfCheck check_gradients() {
  namespace tn = tensor;
  Rng rng(3);
  auto rnd = [&](tn::Shape s) {
    std::vector<double> v(tn::numel(s));
    for (auto& x : v) x = rng.normal();
    return tn::Tensor::from(s, v, true);
  };
  const auto a = rnd({3, 4}), b = rnd({4, 2});
  const auto res = tn::grad_check([&] { return tn::sum_all(tn::tanh(tn::matmul(a, b))); }, {a, b});
  std::ostringstream d;
  d << "max rel error " << res.max_rel_error;
  return {"matmul/tanh gradients", res.max_rel_error < 1e-6, d.str()};
}

}  // namespace

std::vector<SelfCheck> selftest() {
  return {check_regrid(), check_metrics(), check_topsis(), check_gcf(), check_gradients()};
}

}  // namespace climdown::pipeline
