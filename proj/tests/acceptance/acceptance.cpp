// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers to run a subset.

#include <algorithm>
#include <chrono>
#include <cstring>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "climdown/downscale/benchmark.hpp"
#include "climdown/downscale/evaluate.hpp"
#include "climdown/downscale/loss.hpp"
#include "climdown/downscale/train.hpp"
#include "climdown/geogrid/gcf.hpp"
#include "climdown/geogrid/ops.hpp"
#include "climdown/metrics/metrics.hpp"
#include "climdown/pipeline/manifest.hpp"
#include "climdown/pipeline/stages.hpp"
#include "climdown/ranking/topsis.hpp"
#include "climdown/ranking/weightnet.hpp"
#include "climdown/rng.hpp"
#include "climdown/tensor/gradcheck.hpp"
#include "climdown/tensor/ops.hpp"
#include "support.hpp"

using namespace climdown;
namespace fs = std::filesystem;
namespace tn = climdown::tensor;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
  std::vector<std::string> failures;

  void expect(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      if (failures.size() < 5) failures.push_back(what);
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// ---------------------------------------------------------------------------------------
// 1. metrics against straight-line formulas

struct Naive {
  long double bias, rmse, r, r2, nse, kge, pdf, txx, tnn, sd_diff;
};

Naive naive_metrics(const std::vector<double>& m, const std::vector<double>& o) {
  const std::size_t n = m.size();
  long double sm = 0, so = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sm += m[i];
    so += o[i];
  }
  const long double mm = sm / n, mo = so / n;
  long double vm = 0, vo = 0, cov = 0, sse = 0;
  for (std::size_t i = 0; i < n; ++i) {
    vm += (m[i] - mm) * (m[i] - mm);
    vo += (o[i] - mo) * (o[i] - mo);
    cov += (m[i] - mm) * (o[i] - mo);
    const long double e = static_cast<long double>(m[i]) - o[i];
    sse += e * e;
  }
  Naive r{};
  r.bias = mm - mo;
  r.rmse = std::sqrt(sse / n);
  r.r = cov / std::sqrt(vm * vo);
  r.r2 = r.r * r.r;
  r.nse = 1 - sse / vo;
  const long double sdm = std::sqrt(vm / n), sdo = std::sqrt(vo / n);
  const long double beta = mm / mo, gamma = (sdm / mm) / (sdo / mo);
  r.kge = 1 - std::sqrt((r.r - 1) * (r.r - 1) + (beta - 1) * (beta - 1) + (gamma - 1) * (gamma - 1));
  const double lo = std::min(*std::min_element(m.begin(), m.end()), *std::min_element(o.begin(), o.end()));
  const double hi = std::max(*std::max_element(m.begin(), m.end()), *std::max_element(o.begin(), o.end()));
  const int bins = metrics::kDefaultPdfBins;
  std::vector<long double> hm(bins, 0), ho(bins, 0);
  auto bin = [&](double x) { return std::min(bins - 1, static_cast<int>((x - lo) / (hi - lo) * bins)); };
  for (std::size_t i = 0; i < n; ++i) {
    hm[bin(m[i])] += 1.0L / n;
    ho[bin(o[i])] += 1.0L / n;
  }
  r.pdf = 0;
  for (int b = 0; b < bins; ++b) r.pdf += std::min(hm[b], ho[b]);
  r.txx = std::fabs(*std::max_element(m.begin(), m.end()) - *std::max_element(o.begin(), o.end()));
  r.tnn = std::fabs(*std::min_element(m.begin(), m.end()) - *std::min_element(o.begin(), o.end()));
  r.sd_diff = std::fabs(sdm - sdo);
  return r;
}

Outcome metric_oracles() {
  using metrics::MetricId;
  Outcome out;
  Rng rng(1001);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.below(255);
    const double loc = rng.uniform(-20.0, 30.0), spread = rng.uniform(0.1, 15.0);
    std::vector<double> o(n), m(n);
    for (std::size_t i = 0; i < n; ++i) {
      o[i] = rng.normal(loc, spread);
      m[i] = rng.uniform(0.5, 1.2) * o[i] + rng.normal(rng.uniform(-3.0, 3.0), spread * 0.5);
    }
    const auto rep = metrics::compute_report(metrics::PooledSample(m, o));
    const auto want = naive_metrics(m, o);
    const std::pair<MetricId, long double> pairs[] = {
        {MetricId::kBias, want.bias}, {MetricId::kRmse, want.rmse}, {MetricId::kR, want.r},
        {MetricId::kR2, want.r2},     {MetricId::kNse, want.nse},   {MetricId::kKge, want.kge},
        {MetricId::kPdfOverlap, want.pdf}, {MetricId::kTxxErr, want.txx}, {MetricId::kTnnErr, want.tnn},
        {MetricId::kSdDiff, want.sd_diff}};
    for (const auto& [id, w] : pairs) {
      const auto got = rep.get(id);
      if (!got) {
        out.expect(false, std::string(metrics::metric_name(id)) + " undefined on trial " + std::to_string(trial));
        continue;
      }
      const double rel = static_cast<double>(std::fabs(*got - w) / std::max<long double>(std::fabs(w), 1e-6L));
      worst = std::max(worst, rel);
      out.expect(rel <= 1e-9, std::string(metrics::metric_name(id)) + " off by " + num(rel) + " on trial " +
                                  std::to_string(trial));
    }
  }
  // Perfect model.
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> v(2 + rng.below(255));
    for (auto& x : v) x = rng.normal(rng.uniform(-10.0, 30.0), 4.0);
    const auto rep = metrics::compute_report(metrics::PooledSample(v, v));
    out.expect(std::fabs(rep.raw(MetricId::kBias)) <= 1e-12 && std::fabs(rep.raw(MetricId::kRmse)) <= 1e-12 &&
                   std::fabs(*rep.get(MetricId::kR) - 1) <= 1e-12 && std::fabs(*rep.get(MetricId::kNse) - 1) <= 1e-12 &&
                   std::fabs(*rep.get(MetricId::kKge) - 1) <= 1e-12 &&
                   std::fabs(rep.raw(MetricId::kPdfOverlap) - 1) <= 1e-12,
               "perfect-model row not exact");
  }
  out.detail = "1000 random samples x 10 metrics, worst rel err " + num(worst) + "; perfect row exact";
  return out;
}

// ---------------------------------------------------------------------------------------
// 2. TOPSIS properties

ranking::DecisionMatrix random_matrix(Rng& rng, std::size_t m, std::size_t n, bool integers) {
  using metrics::MetricId;
  const MetricId ids[] = {MetricId::kRmse, MetricId::kNse, MetricId::kKge, MetricId::kBias, MetricId::kR,
                          MetricId::kPdfOverlap, MetricId::kTxxErr, MetricId::kSdDiff};
  ranking::DecisionMatrix c;
  for (std::size_t i = 0; i < m; ++i) c.models.push_back("m" + std::to_string(i));
  for (std::size_t j = 0; j < n; ++j) c.criteria.push_back(ranking::criterion(ids[j % 8]));
  for (std::size_t k = 0; k < m * n; ++k)
    c.values.push_back(integers ? static_cast<double>(1 + rng.below(1000)) : rng.uniform(0.01, 10.0));
  return c;
}

ranking::WeightVector random_weights(Rng& rng, std::size_t n) {
  std::vector<double> w(n);
  for (auto& x : w) x = rng.uniform(0.05, 1.0);
  const double s = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& x : w) x /= s;
  // Exact unit sum is not needed; validate_weights allows 1e-9.
  return w;
}

Outcome topsis_properties() {
  Outcome out;
  {
    ranking::DecisionMatrix c;
    c.models = {"A", "B", "C"};
    c.criteria = {ranking::criterion(metrics::MetricId::kNse), ranking::criterion(metrics::MetricId::kKge)};
    c.values = {1, 1, 0.5, 0.5, 0, 0};
    const auto r = ranking::topsis(c, ranking::uniform_weights(2));
    out.expect(r.scores[0].cc == 1.0 && r.scores[1].cc == 0.5 && r.scores[2].cc == 0.0, "3x2 hand case");
  }
  Rng rng(2002);
  std::size_t checked = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t m = 2 + rng.below(12), n = 1 + rng.below(8);
    const bool integers = trial % 2 == 0;
    const auto c = random_matrix(rng, m, n, integers);
    const auto w = random_weights(rng, n);
    const auto r = ranking::topsis(c, w);
    for (const auto& s : r.scores) out.expect(s.cc >= 0.0 && s.cc <= 1.0, "CC outside [0, 1]");

    // Rescaled criterion: same ordering always; bit-identical scores for integer columns.
    const std::size_t j = rng.below(n);
    const double ks[] = {2.0, 0.25, 1024.0, 3.0, 7.0, 1000.0, rng.uniform(1e-3, 1e3)};
    for (double k : ks) {
      auto scaled = c;
      for (std::size_t i = 0; i < m; ++i) scaled.values[i * n + j] *= k;
      const auto rs = ranking::topsis(scaled, w);
      out.expect(rs.order == r.order, "ordering changed under column scale " + num(k));
      // Powers of two are exact on any column; integer factors are exact on integer columns.
      const bool pow2 = std::exp2(std::round(std::log2(k))) == k;
      if (pow2 || (integers && k == std::round(k))) {
        for (std::size_t i = 0; i < m; ++i)
          out.expect(rs.scores[i].cc == r.scores[i].cc, "CC not bit-identical under scale " + num(k));
      }
    }

    // Row permutation.
    std::vector<std::size_t> perm(m);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = m; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    ranking::DecisionMatrix p = c;
    for (std::size_t i = 0; i < m; ++i) {
      p.models[i] = c.models[perm[i]];
      for (std::size_t q = 0; q < n; ++q) p.values[i * n + q] = c.values[perm[i] * n + q];
    }
    const auto rp = ranking::topsis(p, w);
    for (std::size_t i = 0; i < m; ++i)
      out.expect(rp.scores[i].cc == r.scores[perm[i]].cc, "row permutation changed a CC");
    out.expect(rp.best().model == r.best().model, "row permutation changed the winner");

    // Identical rows and dominance endpoints.
    ranking::DecisionMatrix same = c;
    for (std::size_t i = 1; i < m; ++i)
      for (std::size_t q = 0; q < n; ++q) same.values[i * n + q] = c.values[q];
    for (const auto& s : ranking::topsis(same, w).scores) out.expect(s.cc == 0.5, "identical rows not 0.5");

    ranking::DecisionMatrix dom = c;
    for (std::size_t q = 0; q < n; ++q) {
      double lo = c.values[q], hi = c.values[q];
      for (std::size_t i = 0; i < m; ++i) {
        lo = std::min(lo, c.values[i * n + q]);
        hi = std::max(hi, c.values[i * n + q]);
      }
      const bool benefit = c.criteria[q].orientation == ranking::Orientation::kBenefit;
      dom.values[q] = benefit ? hi + 1.0 : lo * 0.5;              // row 0 best everywhere
      dom.values[(m - 1) * n + q] = benefit ? lo * 0.5 : hi + 1.0;  // last row worst everywhere
    }
    const auto rd = ranking::topsis(dom, w);
    out.expect(rd.scores[0].cc == 1.0 && rd.scores[m - 1].cc == 0.0, "dominance endpoints");
    ++checked;
  }
  out.detail = std::to_string(checked) + " random matrices: range, scale, permutation, ties, dominance; hand case";
  return out;
}

// ---------------------------------------------------------------------------------------
// 3. gradients

tn::Tensor rand_t(tn::Shape s, Rng& rng, double sd = 1.0, bool grad = true) {
  std::vector<double> v(tn::numel(s));
  for (auto& x : v) x = rng.normal(0.0, sd);
  return tn::Tensor::from(std::move(s), std::move(v), grad);
}

Outcome gradients() {
  Outcome out;
  Rng rng(3003);
  double worst = 0.0;
  std::size_t cases = 0;
  auto check = [&](const std::string& name, const std::function<tn::Tensor()>& f, const std::vector<tn::Tensor>& ps) {
    Rng pr(99);
    std::optional<tn::Tensor> probe;
    const auto r = tn::grad_check(
        [&] {
          const auto y = f();
          if (!probe) {
            std::vector<double> v(y.size());
            for (auto& x : v) x = pr.normal();
            probe = tn::Tensor::from(y.shape(), v);
          }
          return tn::sum_all(tn::mul(y, *probe));
        },
        ps, 1e-5);
    worst = std::max(worst, r.max_rel_error);
    out.expect(r.max_rel_error < 1e-4, name + " rel err " + num(r.max_rel_error));
    out.expect(r.skipped * 20 <= r.checked, name + " skipped too many kinks");
    ++cases;
  };
  {
    auto a = rand_t({3, 4, 5}, rng), b = rand_t({4, 5}, rng), c = rand_t({3, 4, 5}, rng);
    check("add", [&] { return tn::add(a, b); }, {a, b});
    check("sub", [&] { return tn::sub(a, c); }, {a, c});
    check("mul", [&] { return tn::mul(a, b); }, {a, b});
    check("scale", [&] { return tn::add_scalar(tn::scale(a, -1.3), 0.2); }, {a});
    check("relu", [&] { return tn::relu(a); }, {a});
    check("sigmoid", [&] { return tn::sigmoid(a); }, {a});
    check("tanh", [&] { return tn::tanh(a); }, {a});
    for (int axis : {0, 1, 2}) check("softmax", [&] { return tn::softmax(a, axis); }, {a});
    check("reshape", [&] { return tn::reshape(a, {5, 12}); }, {a});
    check("permute", [&] { return tn::permute(a, {2, 0, 1}); }, {a});
    check("slice", [&] { return tn::slice(a, 2, 1, 3); }, {a});
    check("concat", [&] { return tn::concat({a, c}, 1); }, {a, c});
    for (int axis : {0, 1, 2}) check("mean_axis", [&] { return tn::mean_axis(a, axis); }, {a});
    check("mean_all", [&] { return tn::mean_all(a); }, {a});
  }
  {
    auto a = rand_t({3, 4}, rng), b = rand_t({4, 6}, rng);
    check("matmul", [&] { return tn::matmul(a, b); }, {a, b});
    auto p = rand_t({2, 3, 4}, rng), q = rand_t({2, 4, 5}, rng), r = rand_t({2, 5, 4}, rng);
    check("bmm", [&] { return tn::bmm(p, q); }, {p, q});
    check("bmm_t", [&] { return tn::bmm(p, r, true); }, {p, r});
    auto w = rand_t({4, 5}, rng), bias = rand_t({5}, rng);
    check("dense", [&] { return tn::dense(p, w, bias); }, {p, w, bias});
    auto kq = rand_t({2, 5, 4}, rng), v = rand_t({2, 5, 3}, rng);
    check("attention", [&] { return tn::attention(p, kq, v); }, {p, kq, v});
  }
  {
    auto x = rand_t({2, 3, 6, 5}, rng), k = rand_t({4, 3, 3, 3}, rng), b = rand_t({4}, rng);
    check("conv2d same", [&] { return tn::conv2d(x, k, b, 1, tn::Padding::kSame); }, {x, k, b});
    check("conv2d stride 2", [&] { return tn::conv2d(x, k, b, 2, tn::Padding::kValid); }, {x, k, b});
    auto xt = rand_t({2, 3, 3, 2}, rng), kt = rand_t({3, 2, 4, 4}, rng), bt = rand_t({2}, rng);
    check("conv2d_transpose", [&] { return tn::conv2d_transpose(xt, kt, bt, 4); }, {xt, kt, bt});
  }
  {
    auto x = rand_t({3, 4, 6}, rng, 2.0), g = rand_t({6}, rng), be = rand_t({6}, rng);
    check("layer_norm", [&] { return tn::layer_norm(x, g, be); }, {x, g, be});
    auto xb = rand_t({3, 4, 2, 3}, rng, 2.0), gb = rand_t({4}, rng), bb = rand_t({4}, rng);
    tn::BatchNormState st(4);
    check("batch_norm train", [&] { return tn::batch_norm(xb, gb, bb, st, true); }, {xb, gb, bb});
    check("batch_norm eval", [&] { return tn::batch_norm(xb, gb, bb, st, false); }, {xb, gb, bb});
    auto p = rand_t({4, 5}, rng), t = rand_t({4, 5}, rng);
    std::vector<double> w(20);
    for (auto& e : w) e = rng.uniform(0.5, 3.0);
    check("mse", [&] { return tn::mse(p, t); }, {p, t});
    check("weighted_mse", [&] { return tn::weighted_mse(p, t, w); }, {p, t});
  }
  {
    auto x = rand_t({3, 4}, rng), h = rand_t({3, 5}, rng), c = rand_t({3, 5}, rng);
    tn::LstmParams lp{rand_t({4, 20}, rng), rand_t({5, 20}, rng), rand_t({20}, rng)};
    check("lstm_cell h", [&] { return tn::lstm_cell(x, {h, c}, lp).h; }, {x, h, c, lp.w_x, lp.w_h, lp.b});
    check("lstm_cell c", [&] { return tn::lstm_cell(x, {h, c}, lp).c; }, {x, h, c, lp.w_x, lp.w_h, lp.b});
    auto X = rand_t({2, 2, 4, 5}, rng), H = rand_t({2, 3, 4, 5}, rng), C = rand_t({2, 3, 4, 5}, rng);
    tn::ConvLstmParams cp{rand_t({12, 2, 3, 3}, rng, 0.5), rand_t({12, 3, 3, 3}, rng, 0.5), rand_t({12}, rng)};
    check("convlstm_cell", [&] { return tn::convlstm_cell(X, {H, C}, cp).h; }, {X, H, C, cp.k_x, cp.k_h, cp.b});
  }
  // Whole architectures, miniature config: 8x8 coarse, t = 2, factor 2.
  std::vector<downscale::ArchConfig> archs;
  for (auto k : downscale::kAllArchs) archs.push_back(downscale::miniature_arch(k, 3));
  archs.push_back(downscale::miniature_arch(downscale::ArchKind::kGeoStaNet, 3));
  archs.back().temporal = downscale::TemporalMode::kAttention;
  const downscale::InputShape shape{2, 1, 8, 8, 2};
  for (const auto& cfg : archs) {
    auto net = downscale::make_downscaler(cfg, shape);
    const auto x = rand_t({2, 2, 1, 8, 8}, rng, 1.0, false);
    std::vector<double> cv(8);
    for (auto& v : cv) v = rng.uniform(-1.0, 1.0);
    const auto coords = tn::Tensor::from({4, 2}, cv);
    const auto y = rand_t({2, 16, 16}, rng, 1.0, false);
    const auto r = tn::grad_check(
        [&] { return downscale::imbalance_weighted_mse(net->forward(x, coords, true), y, 0.5); },
        net->params().tensors(), 1e-5);
    const std::string name = std::string(downscale::to_string(cfg.kind)) + "/" + std::string(downscale::to_string(cfg.temporal));
    worst = std::max(worst, r.max_rel_error);
    out.expect(r.max_rel_error < 1e-4, name + " rel err " + num(r.max_rel_error) + " (analytic " +
                                           num(r.worst_analytic) + ", numeric " + num(r.worst_numeric) + ")");
    out.expect(r.skipped * 20 <= r.checked, name + " skipped too many kinks");
    ++cases;
  }
  out.detail = std::to_string(cases) + " op/architecture checks at eps 1e-5, worst rel err " + num(worst);
  return out;
}

// ---------------------------------------------------------------------------------------
// 4. weight network

Outcome weightnet() {
  Outcome out;
  const auto crit = ranking::default_criteria();
  const auto ctx = ranking::synthetic_contexts(1000, 50, crit);
  std::string ratios;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ranking::WeightNet net(crit, seed);
    ranking::WeightNetConfig cfg;
    cfg.seed = seed;
    const auto log = ranking::train_weightnet(net, ctx, cfg);
    const double ratio = log.epoch_loss.back() / log.epoch_loss.front();
    ratios += (ratios.empty() ? "" : " ") + num(ratio);
    out.expect(ratio < 0.1, "seed " + std::to_string(seed) + " final/first MSE " + num(ratio));
    for (const auto& c : ranking::synthetic_contexts(5000, 20, crit)) {
      const auto w = net.predict(c);
      double s = 0.0;
      for (double v : w) {
        out.expect(v >= 0.0, "negative weight");
        s += v;
      }
      out.expect(std::fabs(s - 1.0) <= 1e-9, "weights sum to " + num(s));
    }
  }
  // Single context trained to convergence.
  const std::vector<ranking::DecisionMatrix> one{ranking::synthetic_matrix(77, 12, crit)};
  ranking::WeightNet net(crit, 5);
  ranking::WeightNetConfig cfg;
  cfg.epochs = 600;
  ranking::train_weightnet(net, one, cfg);
  const auto w = net.predict(one[0]);
  const auto target = ranking::entropy_target_weights(ranking::normalize(one[0]), one[0]);
  double linf = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) linf = std::max(linf, std::fabs(w[k] - target[k]));
  out.expect(linf <= 0.05, "single-context L-inf " + num(linf));
  out.detail = "final/first MSE per seed: " + ratios + "; single-context L-inf " + num(linf);
  return out;
}

// ---------------------------------------------------------------------------------------
// 5. downscaler capacity and benchmark

Outcome capacity() {
  Outcome out;
  std::string detail;
  const auto small = downscale::make_benchmark(downscale::overfit_spec());
  downscale::TrainConfig tc;
  tc.epochs = 500;
  for (auto kind : downscale::kAllArchs) {
    const auto r = downscale::train(downscale::default_arch(kind), small.data, downscale::Dataset{}, tc);
    const double mse = downscale::normalized_mse(r.model, small.data);
    out.expect(mse < 0.01 && r.log.fault.empty(), std::string(downscale::to_string(kind)) + " overfit MSE " + num(mse));
    detail += std::string(detail.empty() ? "overfit MSE " : ", ") + std::string(downscale::to_string(kind)) + " " + num(mse);
  }

  const auto bench = downscale::make_benchmark();
  const auto split = downscale::benchmark_split(bench.data.size());
  const auto train_set = bench.data.subset(split.train), val = bench.data.subset(split.val);
  const double base = downscale::field_rmse(bench.data, split.test, downscale::baseline_prediction(bench.data, split.test));
  detail += "; test RMSE bilinear " + num(base);
  std::map<downscale::ArchKind, double> rmse_of;
  for (auto kind : downscale::kAllArchs) {
    const auto r = downscale::train(downscale::default_arch(kind), train_set, val, downscale::TrainConfig{});
    const std::string name(downscale::to_string(kind));
    const double rmse = downscale::field_rmse(bench.data, split.test, downscale::model_prediction(r.model, bench.data, split.test, name));
    out.expect(rmse < base && r.log.fault.empty(), name + " test RMSE " + num(rmse) + " vs bilinear " + num(base));
    detail += ", " + name + " " + num(rmse);
    rmse_of[kind] = rmse;
  }
  // The geospatial transformer should not trail the ConvLSTM baseline.
  out.expect(rmse_of[downscale::ArchKind::kGeoStaNet] <= rmse_of[downscale::ArchKind::kConvLstm],
             "geostanet RMSE above convlstm");
  out.detail = detail;
  return out;
}

// ---------------------------------------------------------------------------------------
// 6. bias correction

Outcome bias_correction() {
  Outcome out;
  downscale::BenchmarkSpec spec;
  spec.bias = 2.0;
  const auto bench = downscale::make_benchmark(spec);
  const auto split = downscale::benchmark_split(bench.data.size());
  const auto r = downscale::train(downscale::default_arch(downscale::ArchKind::kGeoStaNet), bench.data.subset(split.train),
                                  bench.data.subset(split.val), downscale::TrainConfig{});
  const double model_bias = downscale::field_bias(
      bench.data, split.test, downscale::model_prediction(r.model, bench.data, split.test, "geostanet"));
  const double raw_bias = downscale::field_bias(bench.data, split.test, downscale::baseline_prediction(bench.data, split.test));
  out.expect(std::fabs(model_bias) < 0.5, "downscaled bias " + num(model_bias));
  out.expect(std::fabs(raw_bias) > 1.5 && std::fabs(raw_bias) < 2.5, "raw coarse bias " + num(raw_bias));
  out.expect(std::fabs(raw_bias) >= 3.0 * std::fabs(model_bias), "reduction below 3x");
  out.detail = "raw coarse bias " + num(raw_bias) + " degC, GeoSTANet output bias " + num(model_bias) +
               " degC, reduction " + num(std::fabs(raw_bias) / std::max(std::fabs(model_bias), 1e-12)) + "x";
  return out;
}

// ---------------------------------------------------------------------------------------
// 7. ranking fixture end to end

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome ranking_fixture() {
  Outcome out;
  testing::TempDir dir("acceptance_rank");
  pipeline::write_fixture(dir / "fx");
  std::vector<std::string> manifests;
  std::size_t contexts = 0, wins = 0;
  for (const char* run : {"a", "b"}) {
    const auto cfg = pipeline::load_config(dir / "fx" / "config.json");
    const auto o = dir / run;
    pipeline::RunRecorder rec(o, cfg.canonical, cfg.seed);
    const auto r = pipeline::run_rank(cfg, o);
    rec.record("rank", 0.0);
    rec.flush();
    manifests.push_back(slurp(o / "manifest.json"));
    contexts = r.ranking.contexts.size();
    wins = 0;
    for (const auto& c : r.ranking.contexts) {
      const bool first = c.result.best().model == "unbiased";
      wins += first;
      out.expect(first, c.matrix.context.label() + " won by " + c.result.best().model);
    }
  }
  out.expect(contexts == 30, "expected 30 contexts, got " + std::to_string(contexts));
  out.expect(manifests[0] == manifests[1], "manifests differ between reruns");
  out.detail = "unbiased first in " + std::to_string(wins) + "/" + std::to_string(contexts) +
               " contexts; rerun manifests " + (manifests[0] == manifests[1] ? "identical" : "differ");
  return out;
}

// ---------------------------------------------------------------------------------------
// 8. regridding and seasons

Outcome regrid_suite() {
  using namespace geogrid;
  Outcome out;
  {
    const DataCube src(GridAxis::latitude({0, 1}), GridAxis::longitude({0, 1}), {{2000, 1, 1}}, Calendar::kStandard,
                       "tas", "degC", {0, 1, 2, 3});
    const auto r = regrid_bilinear(src, GridAxis::latitude({0.5}), GridAxis::longitude({0.5}));
    out.expect(r.at(0, 0, 0) == 1.5, "centre point gave " + num(r.at(0, 0, 0)));
  }
  Rng rng(8008);
  double worst_lin = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = testing::random_cube(rng, 2, 3 + rng.below(6), 3 + rng.below(6));
    out.expect(regrid_bilinear(x, x.lat(), x.lon()) == x, "identity regrid not exact");

    std::vector<double> dlat, dlon;
    const std::size_t ny = 2 + rng.below(10), nx = 2 + rng.below(10);
    for (std::size_t i = 0; i < ny; ++i)
      dlat.push_back(x.lat().front() - 0.5 + (x.lat().back() - x.lat().front() + 1.0) * i / (ny - 1));
    for (std::size_t j = 0; j < nx; ++j)
      dlon.push_back(x.lon().front() - 0.5 + (x.lon().back() - x.lon().front() + 1.0) * j / (nx - 1));
    const auto la = GridAxis::latitude(dlat), lo = GridAxis::longitude(dlon);
    const auto rx = regrid_bilinear(x, la, lo);
    auto bracket = [](const GridAxis& a, double v) {
      std::size_t k = 0;
      while (k + 2 < a.size() && a[k + 1] <= v) ++k;
      return k;
    };
    for (std::size_t t = 0; t < x.nt(); ++t)
      for (std::size_t i = 0; i < ny; ++i)
        for (std::size_t j = 0; j < nx; ++j) {
          const std::size_t bi = bracket(x.lat(), la[i]), bj = bracket(x.lon(), lo[j]);
          const double n4[4] = {x.at(t, bi, bj), x.at(t, bi, bj + 1), x.at(t, bi + 1, bj), x.at(t, bi + 1, bj + 1)};
          const double v = rx.at(t, i, j);
          const double lo4 = *std::min_element(n4, n4 + 4), hi4 = *std::max_element(n4, n4 + 4);
          const double slack = 1e-12 * std::max(std::fabs(lo4), std::fabs(hi4));
          out.expect(v >= lo4 - slack && v <= hi4 + slack, "convexity bound");
        }

    const auto y = testing::random_cube(rng, 2, x.nlat(), x.nlon());
    const DataCube yy = x.with_data(std::vector<double>(y.data().begin(), y.data().end()));
    const double a = rng.uniform(-3.0, 3.0), b = rng.uniform(-3.0, 3.0);
    std::vector<double> comb(x.data().size());
    for (std::size_t k = 0; k < comb.size(); ++k) comb[k] = a * x.data()[k] + b * yy.data()[k];
    const auto lhs = regrid_bilinear(x.with_data(comb), la, lo);
    const auto ry = regrid_bilinear(yy, la, lo);
    for (std::size_t k = 0; k < lhs.data().size(); ++k) {
      const double rhs = a * rx.data()[k] + b * ry.data()[k];
      const double scale = std::fabs(a * rx.data()[k]) + std::fabs(b * ry.data()[k]) + 1e-300;
      const double err = std::fabs(lhs.data()[k] - rhs) / scale;
      worst_lin = std::max(worst_lin, err);
      out.expect(err <= 1e-12, "linearity error " + num(err));
    }
  }
  for (Calendar cal : {Calendar::kStandard, Calendar::kNoLeap, Calendar::k360Day}) {
    const std::size_t n = 4 * 365 + 17;
    const DataCube cube(GridAxis::latitude({0, 1}), GridAxis::longitude({0, 1}),
                        testing::daily(cal, {1987, 11, 3}, n), cal, "tasmax", "degC", std::vector<double>(n * 4, 1.0));
    std::vector<Date> pooled;
    for (Season s : {Season::kDJF, Season::kMAM, Season::kJJA, Season::kSON}) {
      const auto part = select_season(cube, s).time();
      for (const auto& d : part) out.expect(season_contains(s, d.month), "season holds a foreign month");
      pooled.insert(pooled.end(), part.begin(), part.end());
    }
    std::sort(pooled.begin(), pooled.end());
    out.expect(std::adjacent_find(pooled.begin(), pooled.end()) == pooled.end(), "seasons overlap");
    out.expect(pooled == cube.time(), std::string(to_string(cal)) + ": seasons do not partition the record");
    out.expect(select_season(cube, Season::kAnnual).time() == cube.time(), "ANNUAL is not the whole record");
  }
  out.detail = "hand point, identity, convexity and linearity (worst " + num(worst_lin) +
               ") on 50 random grids; season partition on 3 calendars";
  return out;
}

// ---------------------------------------------------------------------------------------
// 9. round trips

Outcome round_trips() {
  Outcome out;
  testing::TempDir dir("acceptance_io");
  Rng rng(9009);
  const geogrid::Calendar cals[] = {geogrid::Calendar::kStandard, geogrid::Calendar::kNoLeap, geogrid::Calendar::k360Day};
  std::size_t with_fill = 0;
  for (int i = 0; i < 100; ++i) {
    const auto cube = testing::random_cube(rng, 1 + rng.below(6), 1 + rng.below(9), 1 + rng.below(9), 0.1, cals[i % 3]);
    with_fill += std::count(cube.data().begin(), cube.data().end(), cube.fill()) > 0;
    const auto p = dir / ("cube" + std::to_string(i));
    geogrid::write_cube(cube, p);
    const auto back = geogrid::read_cube(p);
    bool bits = back == cube && back.data().size() == cube.data().size();
    for (std::size_t k = 0; bits && k < cube.data().size(); ++k)
      bits = std::memcmp(&back.data()[k], &cube.data()[k], sizeof(double)) == 0;
    out.expect(bits, "cube " + std::to_string(i) + " changed on round trip");
  }

  downscale::BenchmarkSpec spec;
  spec.samples = 10;
  const auto bench = downscale::make_benchmark(spec);
  std::vector<std::size_t> idx(bench.data.size());
  std::iota(idx.begin(), idx.end(), 0);
  downscale::TrainConfig tc;
  tc.epochs = 1;
  for (auto kind : downscale::kAllArchs) {
    const std::string name(downscale::to_string(kind));
    const auto r = downscale::train(downscale::default_arch(kind, 5), bench.data, downscale::Dataset{}, tc);
    r.model.save(dir / name);
    const auto back = downscale::TrainedModel::load(dir / name);
    out.expect(back.net->params().flat_values() == r.model.net->params().flat_values(), name + " parameters differ");
    out.expect(back.norm.mean == r.model.norm.mean && back.norm.sd == r.model.norm.sd, name + " normaliser differs");
    out.expect(back.net->config().kind == kind, name + " kind lost");
    // Inference also reads the batch-norm running statistics.
    out.expect(back.predict(bench.data, idx) == r.model.predict(bench.data, idx), name + " predictions differ");
  }
  out.detail = "100 cubes (" + std::to_string(with_fill) + " with fill) bit-identical; 4 checkpoints reload exactly";
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_level(spdlog::level::warn);
  struct Entry {
    int id;
    const char* name;
    std::function<Outcome()> run;
    double budget_s;
  };
  const std::vector<Entry> all{
      {1, "metric oracle equivalence", metric_oracles, 10},
      {2, "TOPSIS properties", topsis_properties, 5},
      {3, "gradient correctness", gradients, 300},
      {4, "WeightNet training", weightnet, 120},
      {5, "downscaler capacity and benchmark", capacity, 1800},
      {6, "synthetic bias correction", bias_correction, 1800},
      {7, "end-to-end ranking fixture", ranking_fixture, 60},
      {8, "regrid suite", regrid_suite, 60},
      {9, "GCF and checkpoint round trips", round_trips, 120},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& e : all) {
    if (!wanted.empty() && !wanted.count(e.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = e.run();
    } catch (const std::exception& ex) {
      o.ok = false;
      o.failures.push_back(std::string("exception: ") + ex.what());
    }
    const double s = seconds_since(t0);
    if (s > e.budget_s) {
      o.ok = false;
      o.failures.push_back("took " + num(s) + " s, budget " + num(e.budget_s) + " s");
    }
    std::printf("%s criterion %d (%s): %s [%.1f s]\n", o.ok ? "PASS" : "FAIL", e.id, e.name, o.detail.c_str(), s);
    for (const auto& f : o.failures) std::printf("    %s\n", f.c_str());
    std::fflush(stdout);
    failed += !o.ok;
  }
  return failed == 0 ? 0 : 1;
}
