#pragma once

#include <string>
#include <vector>

#include "climdown/metrics/metrics.hpp"

namespace climdown::ranking {

enum class Orientation { kBenefit, kCost };

struct Criterion {
  metrics::MetricId metric;
  Orientation orientation;
  bool operator==(const Criterion&) const = default;
};

/// Fixed orientation per metric: kge, nse, r, r2, pdf_overlap are benefits; |bias|, rmse,
/// txx_err, tnn_err, sd_diff are costs.
Criterion criterion(metrics::MetricId id);
/// rmse, bias, nse, kge, r, r2, pdf_overlap, txx_err, tnn_err.
std::vector<Criterion> default_criteria();
std::vector<Criterion> parse_criteria(const std::vector<std::string>& names);

struct Context {
  std::string zone;
  std::string season;
  bool operator==(const Context&) const = default;
  std::string label() const { return zone + "/" + season; }
};

/// Models x criteria, row-major.
struct DecisionMatrix {
  std::vector<std::string> models;
  std::vector<Criterion> criteria;
  std::vector<double> values;
  Context context;

  std::size_t m() const { return models.size(); }
  std::size_t n() const { return criteria.size(); }
  double at(std::size_t i, std::size_t j) const { return values[i * n() + j]; }
};

struct ModelReport {
  std::string model;
  metrics::MetricReport report;
};

struct Assembled {
  DecisionMatrix matrix;
  std::vector<Criterion> dropped;                         // every entry was invalid
  std::vector<std::pair<std::size_t, std::size_t>> imputed;  // (model, criterion) cells
};

/// Builds C from per-model reports. Invalid cells take the column's worst valid value;
/// columns with no valid cell are dropped. Bias enters as |bias|.
Assembled assemble_matrix(const std::vector<ModelReport>& reports,
                          const std::vector<Criterion>& criteria, const Context& context);

/// Column-wise vector normalisation C_ij / ||C_j||. Zero columns stay zero. Each column is
/// first divided by its largest magnitude, which makes the result independent of any
/// exactly representable rescaling of the column.
std::vector<double> normalize(const DecisionMatrix& c);

using WeightVector = std::vector<double>;
/// Throws unless w has `n` nonnegative finite entries summing to 1 within 1e-9.
void validate_weights(const WeightVector& w, std::size_t n);
WeightVector uniform_weights(std::size_t n);

struct ModelScore {
  std::string model;
  double cc = 0.0;
  double d_plus = 0.0;
  double d_minus = 0.0;
  std::size_t rank = 0;  // 1-based
};

struct RankingResult {
  Context context;
  std::vector<ModelScore> scores;  // input row order
  std::vector<std::size_t> order;  // row indices, best first

  const ModelScore& best() const { return scores[order.front()]; }
};

/// TOPSIS on an already normalised matrix (m x n, row-major).
RankingResult topsis_score(const std::vector<double>& normalized, const DecisionMatrix& c,
                           const WeightVector& w);
/// normalize + topsis_score.
RankingResult topsis(const DecisionMatrix& c, const WeightVector& w);

/// Entropy-weight method on a normalised matrix. Columns are min-max rescaled in their
/// preferred direction (cost columns flipped) and turned into probabilities.
WeightVector entropy_target_weights(const std::vector<double>& normalized, const DecisionMatrix& c);
/// Entropy e_j in [0, 1] of every column, same rescaling as above (1 for constant columns).
std::vector<double> column_entropy(const std::vector<double>& normalized, const DecisionMatrix& c);

/// Per criterion: mean, sd, min, max of the normalised column and its entropy.
inline constexpr std::size_t kFeaturesPerCriterion = 5;
std::vector<double> featurize(const DecisionMatrix& c);

}  // namespace climdown::ranking
