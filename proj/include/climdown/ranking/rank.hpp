#pragma once

#include <optional>
#include <ostream>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "climdown/ranking/topsis.hpp"
#include "climdown/ranking/weightnet.hpp"

namespace climdown::ranking {

struct ContextReports {
  Context context;
  std::vector<ModelReport> reports;
};

enum class WeightSource { kUniform, kEntropy, kWeightNet };
std::string_view to_string(WeightSource s);
WeightSource parse_weight_source(std::string_view s);

struct RankConfig {
  std::vector<Criterion> criteria = default_criteria();
  WeightSource source = WeightSource::kWeightNet;
  WeightNetConfig net;
  std::uint64_t net_seed = 0;
};

struct ContextRanking {
  ContextReports input;
  DecisionMatrix matrix;
  std::vector<Criterion> dropped;
  WeightVector weights;  // aligned with matrix.criteria
  RankingResult result;
};

struct RankOutput {
  std::vector<ContextRanking> contexts;  // input order
  WeightSource source = WeightSource::kUniform;
  std::optional<WeightNet> net;
  WeightNetLog net_log;
};

/// Ranks every context independently. With the weight net, one global net is trained on
/// all contexts first.
RankOutput rank_all(const std::vector<ContextReports>& contexts, const RankConfig& cfg);

/// context columns, model, cc, d_plus, d_minus, rank, then the raw metric row.
void write_ranking_csv(std::ostream& out, const RankOutput& r);
/// Models (sorted) x contexts matrix of CC.
void write_heatmap_csv(std::ostream& out, const RankOutput& r);
/// Top `k` per context with score and the headline metrics.
void write_top_csv(std::ostream& out, const RankOutput& r, std::size_t k = 5);
nlohmann::json weights_json(const RankOutput& r);

}  // namespace climdown::ranking
