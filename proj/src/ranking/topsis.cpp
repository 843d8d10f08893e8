#include "climdown/ranking/topsis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "climdown/error.hpp"

namespace climdown::ranking {

using metrics::MetricId;

Criterion criterion(MetricId id) {
  switch (id) {
    case MetricId::kKge:
    case MetricId::kNse:
    case MetricId::kR:
    case MetricId::kR2:
    case MetricId::kPdfOverlap:
      return {id, Orientation::kBenefit};
    default:
      return {id, Orientation::kCost};
  }
}

std::vector<Criterion> default_criteria() {
  std::vector<Criterion> out;
  for (auto id : {MetricId::kRmse, MetricId::kBias, MetricId::kNse, MetricId::kKge, MetricId::kR,
                  MetricId::kR2, MetricId::kPdfOverlap, MetricId::kTxxErr, MetricId::kTnnErr}) {
    out.push_back(criterion(id));
  }
  return out;
}

std::vector<Criterion> parse_criteria(const std::vector<std::string>& names) {
  std::vector<Criterion> out;
  for (const auto& n : names) {
    const auto c = criterion(metrics::parse_metric(n));
    if (std::find(out.begin(), out.end(), c) != out.end()) {
      throw ValidationError("criterion '" + n + "' listed twice");
    }
    out.push_back(c);
  }
  if (out.empty()) throw ValidationError("no ranking criteria given");
  return out;
}

Assembled assemble_matrix(const std::vector<ModelReport>& reports,
                          const std::vector<Criterion>& criteria, const Context& context) {
  if (reports.size() < 2) {
    throw ValidationError("ranking " + context.label() + ": need at least 2 models, got " +
                          std::to_string(reports.size()));
  }
  Assembled out;
  out.matrix.context = context;
  for (const auto& r : reports) {
    if (std::find(out.matrix.models.begin(), out.matrix.models.end(), r.model) !=
        out.matrix.models.end()) {
      throw ValidationError("ranking " + context.label() + ": duplicate model '" + r.model + "'");
    }
    out.matrix.models.push_back(r.model);
  }
  const std::size_t m = reports.size();
  std::vector<std::vector<double>> cols;
  for (const auto& crit : criteria) {
    std::vector<double> col(m);
    std::vector<bool> ok(m);
    bool any = false;
    double worst = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const auto v = reports[i].report.get(crit.metric);
      ok[i] = v.has_value() && std::isfinite(*v);
      if (!ok[i]) continue;
      col[i] = crit.metric == MetricId::kBias ? std::fabs(*v) : *v;
      if (!any) {
        worst = col[i];
      } else {
        worst = crit.orientation == Orientation::kCost ? std::max(worst, col[i])
                                                       : std::min(worst, col[i]);
      }
      any = true;
    }
    if (!any) {
      out.dropped.push_back(crit);
      continue;
    }
    const std::size_t j = out.matrix.criteria.size();
    for (std::size_t i = 0; i < m; ++i) {
      if (!ok[i]) {
        col[i] = worst;
        out.imputed.emplace_back(i, j);
      }
    }
    out.matrix.criteria.push_back(crit);
    cols.push_back(std::move(col));
  }
  if (cols.empty()) {
    throw ValidationError("ranking " + context.label() + ": every criterion is invalid");
  }
  const std::size_t n = cols.size();
  out.matrix.values.resize(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.matrix.values[i * n + j] = cols[j][i];
  return out;
}

namespace {

// Summing in sorted order makes column reductions independent of model order, so a
// permutation of models permutes the scores bit for bit.
double ordered_sum(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace

std::vector<double> normalize(const DecisionMatrix& c) {
  const std::size_t m = c.m(), n = c.n();
  if (c.values.size() != m * n) throw ValidationError("decision matrix size mismatch");
  std::vector<double> out(m * n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double mx = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (!std::isfinite(c.at(i, j))) throw ValidationError("decision matrix has a non-finite entry");
      mx = std::max(mx, std::fabs(c.at(i, j)));
    }
    if (mx == 0.0) continue;
    std::vector<double> sq(m);
    for (std::size_t i = 0; i < m; ++i) {
      const double u = c.at(i, j) / mx;
      sq[i] = u * u;
    }
    const double norm = std::sqrt(ordered_sum(std::move(sq)));
    for (std::size_t i = 0; i < m; ++i) out[i * n + j] = (c.at(i, j) / mx) / norm;
  }
  return out;
}

void validate_weights(const WeightVector& w, std::size_t n) {
  if (w.size() != n) {
    throw ValidationError("weight vector has " + std::to_string(w.size()) + " entries, need " +
                          std::to_string(n));
  }
  double s = 0.0;
  for (double v : w) {
    if (!std::isfinite(v) || v < 0.0) throw ValidationError("weights must be finite and >= 0");
    s += v;
  }
  if (std::fabs(s - 1.0) > 1e-9) throw ValidationError("weights must sum to 1");
}

WeightVector uniform_weights(std::size_t n) {
  return WeightVector(n, 1.0 / static_cast<double>(n));
}

RankingResult topsis_score(const std::vector<double>& nm, const DecisionMatrix& c,
                           const WeightVector& w) {
  const std::size_t m = c.m(), n = c.n();
  if (nm.size() != m * n) throw ValidationError("normalized matrix size mismatch");
  validate_weights(w, n);
  std::vector<double> wm(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) wm[i * n + j] = w[j] * nm[i * n + j];

  std::vector<double> best(n), worst(n);
  for (std::size_t j = 0; j < n; ++j) {
    double hi = wm[j], lo = wm[j];
    for (std::size_t i = 1; i < m; ++i) {
      hi = std::max(hi, wm[i * n + j]);
      lo = std::min(lo, wm[i * n + j]);
    }
    const bool benefit = c.criteria[j].orientation == Orientation::kBenefit;
    best[j] = benefit ? hi : lo;
    worst[j] = benefit ? lo : hi;
  }

  RankingResult res;
  res.context = c.context;
  for (std::size_t i = 0; i < m; ++i) {
    double dp = 0.0, dm = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double a = wm[i * n + j] - best[j];
      const double b = wm[i * n + j] - worst[j];
      dp += a * a;
      dm += b * b;
    }
    ModelScore s;
    s.model = c.models[i];
    s.d_plus = std::sqrt(dp);
    s.d_minus = std::sqrt(dm);
    const double tot = s.d_plus + s.d_minus;
    s.cc = tot == 0.0 ? 0.5 : s.d_minus / tot;
    res.scores.push_back(s);
  }
  res.order.resize(m);
  std::iota(res.order.begin(), res.order.end(), std::size_t{0});
  std::sort(res.order.begin(), res.order.end(), [&](std::size_t a, std::size_t b) {
    if (res.scores[a].cc != res.scores[b].cc) return res.scores[a].cc > res.scores[b].cc;
    return res.scores[a].model < res.scores[b].model;
  });
  for (std::size_t r = 0; r < m; ++r) res.scores[res.order[r]].rank = r + 1;
  return res;
}

RankingResult topsis(const DecisionMatrix& c, const WeightVector& w) {
  return topsis_score(normalize(c), c, w);
}

namespace {

// Probabilities p_ij per column from the direction-aware min-max rescaling; constant
// constant columns carry no information and return an empty vector (entropy 1).
std::vector<double> column_probabilities(const std::vector<double>& nm, const DecisionMatrix& c,
                                         std::size_t j) {
  const std::size_t m = c.m(), n = c.n();
  double lo = nm[j], hi = nm[j];
  for (std::size_t i = 1; i < m; ++i) {
    lo = std::min(lo, nm[i * n + j]);
    hi = std::max(hi, nm[i * n + j]);
  }
  if (hi == lo) return {};
  std::vector<double> p(m);
  const bool cost = c.criteria[j].orientation == Orientation::kCost;
  for (std::size_t i = 0; i < m; ++i) {
    const double x = nm[i * n + j];
    p[i] = cost ? (hi - x) / (hi - lo) : (x - lo) / (hi - lo);
  }
  const double s = ordered_sum(p);
  for (double& v : p) v /= s;
  return p;
}

}  // namespace

std::vector<double> column_entropy(const std::vector<double>& nm, const DecisionMatrix& c) {
  const std::size_t m = c.m();
  if (m < 2) throw ValidationError("entropy weights need at least 2 models");
  const double lnm = std::log(static_cast<double>(m));
  std::vector<double> e(c.n());
  for (std::size_t j = 0; j < c.n(); ++j) {
    auto p = column_probabilities(nm, c, j);
    if (p.empty()) {
      e[j] = 1.0;
      continue;
    }
    for (double& v : p) v = v > 0.0 ? -v * std::log(v) : 0.0;
    e[j] = std::clamp(ordered_sum(std::move(p)) / lnm, 0.0, 1.0);
  }
  return e;
}

WeightVector entropy_target_weights(const std::vector<double>& nm, const DecisionMatrix& c) {
  const auto e = column_entropy(nm, c);
  std::vector<double> d(e.size());
  double s = 0.0;
  for (std::size_t j = 0; j < e.size(); ++j) {
    d[j] = 1.0 - e[j];
    s += d[j];
  }
  if (s <= 0.0) return uniform_weights(e.size());
  for (double& v : d) v /= s;
  return d;
}

std::vector<double> featurize(const DecisionMatrix& c) {
  const auto nm = normalize(c);
  const auto e = column_entropy(nm, c);
  const std::size_t m = c.m(), n = c.n();
  std::vector<double> f;
  f.reserve(kFeaturesPerCriterion * n);
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> col(m);
    for (std::size_t i = 0; i < m; ++i) col[i] = nm[i * n + j];
    const auto [lo_it, hi_it] = std::minmax_element(col.begin(), col.end());
    const double lo = *lo_it, hi = *hi_it;
    const double mean = ordered_sum(col) / static_cast<double>(m);
    for (double& v : col) v = (v - mean) * (v - mean);
    const double sd = lo == hi ? 0.0 : std::sqrt(ordered_sum(std::move(col)) / static_cast<double>(m));
    f.insert(f.end(), {mean, sd, lo, hi, e[j]});
  }
  return f;
}

}  // namespace climdown::ranking
