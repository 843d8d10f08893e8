#include "climdown/ranking/rank.hpp"

#include <algorithm>
#include <set>

#include <spdlog/spdlog.h>

#include "climdown/error.hpp"
#include "climdown/metrics/report_io.hpp"

namespace climdown::ranking {

using metrics::format_double;
using metrics::MetricId;

std::string_view to_string(WeightSource s) {
  switch (s) {
    case WeightSource::kUniform: return "uniform";
    case WeightSource::kEntropy: return "entropy";
    case WeightSource::kWeightNet: return "weightnet";
  }
  return "?";
}

WeightSource parse_weight_source(std::string_view s) {
  if (s == "uniform") return WeightSource::kUniform;
  if (s == "entropy") return WeightSource::kEntropy;
  if (s == "weightnet") return WeightSource::kWeightNet;
  throw ValidationError("unknown weight source '" + std::string(s) +
                        "' (uniform, entropy, weightnet)");
}

RankOutput rank_all(const std::vector<ContextReports>& contexts, const RankConfig& cfg) {
  if (contexts.empty()) throw ValidationError("ranking: no contexts");
  RankOutput out;
  out.source = cfg.source;
  for (const auto& ctx : contexts) {
    auto a = assemble_matrix(ctx.reports, cfg.criteria, ctx.context);
    for (const auto& d : a.dropped) {
      spdlog::warn("ranking {}: criterion {} invalid for every model, dropped", ctx.context.label(),
                   metrics::metric_name(d.metric));
    }
    ContextRanking cr;
    cr.input = ctx;
    cr.matrix = std::move(a.matrix);
    cr.dropped = std::move(a.dropped);
    out.contexts.push_back(std::move(cr));
  }

  if (cfg.source == WeightSource::kWeightNet) {
    std::vector<DecisionMatrix> mats;
    for (const auto& cr : out.contexts) mats.push_back(cr.matrix);
    WeightNet net(cfg.criteria, cfg.net_seed);
    out.net_log = train_weightnet(net, mats, cfg.net);
    out.net = std::move(net);
  }

  for (auto& cr : out.contexts) {
    switch (cfg.source) {
      case WeightSource::kUniform:
        cr.weights = uniform_weights(cr.matrix.n());
        break;
      case WeightSource::kEntropy:
        cr.weights = entropy_target_weights(normalize(cr.matrix), cr.matrix);
        break;
      case WeightSource::kWeightNet:
        cr.weights = out.net->predict(cr.matrix);
        break;
    }
    cr.result = topsis(cr.matrix, cr.weights);
  }
  return out;
}

namespace {

const metrics::MetricReport& report_of(const ContextRanking& cr, const std::string& model) {
  for (const auto& r : cr.input.reports) {
    if (r.model == model) return r.report;
  }
  throw ValidationError("ranking: no report for model " + model);
}

std::string metric_cell(const metrics::MetricReport& r, MetricId id) {
  return r.is_valid(id) ? format_double(r.raw(id)) : "";
}

}  // namespace

void write_ranking_csv(std::ostream& out, const RankOutput& r) {
  out << "zone,season,model,cc,d_plus,d_minus,rank,n";
  for (auto id : metrics::kAllMetrics) out << ',' << metrics::metric_name(id);
  out << '\n';
  for (const auto& cr : r.contexts) {
    for (std::size_t k : cr.result.order) {
      const auto& s = cr.result.scores[k];
      const auto& rep = report_of(cr, s.model);
      out << cr.matrix.context.zone << ',' << cr.matrix.context.season << ',' << s.model << ','
          << format_double(s.cc) << ',' << format_double(s.d_plus) << ','
          << format_double(s.d_minus) << ',' << s.rank << ',' << rep.n;
      for (auto id : metrics::kAllMetrics) out << ',' << metric_cell(rep, id);
      out << '\n';
    }
  }
}

void write_heatmap_csv(std::ostream& out, const RankOutput& r) {
  std::set<std::string> models;
  for (const auto& cr : r.contexts)
    for (const auto& m : cr.matrix.models) models.insert(m);
  out << "model";
  for (const auto& cr : r.contexts) out << ',' << cr.matrix.context.label();
  out << '\n';
  for (const auto& m : models) {
    out << m;
    for (const auto& cr : r.contexts) {
      out << ',';
      for (const auto& s : cr.result.scores) {
        if (s.model == m) out << format_double(s.cc);
      }
    }
    out << '\n';
  }
}

void write_top_csv(std::ostream& out, const RankOutput& r, std::size_t k) {
  out << "zone,season,rank,model,score,bias,rmse,kge,nse,pdf_overlap\n";
  for (const auto& cr : r.contexts) {
    for (std::size_t i = 0; i < std::min(k, cr.result.order.size()); ++i) {
      const auto& s = cr.result.scores[cr.result.order[i]];
      const auto& rep = report_of(cr, s.model);
      out << cr.matrix.context.zone << ',' << cr.matrix.context.season << ',' << s.rank << ','
          << s.model << ',' << format_double(s.cc) << ',' << metric_cell(rep, MetricId::kBias)
          << ',' << metric_cell(rep, MetricId::kRmse) << ',' << metric_cell(rep, MetricId::kKge)
          << ',' << metric_cell(rep, MetricId::kNse) << ','
          << metric_cell(rep, MetricId::kPdfOverlap) << '\n';
    }
  }
}

nlohmann::json weights_json(const RankOutput& r) {
  nlohmann::json j;
  j["source"] = std::string(to_string(r.source));
  if (r.net) {
    j["weightnet"] = {{"seed", r.net->seed()}, {"epoch_loss", r.net_log.epoch_loss}};
  }
  nlohmann::json ctxs = nlohmann::json::array();
  for (const auto& cr : r.contexts) {
    nlohmann::json w = nlohmann::json::object();
    for (std::size_t k = 0; k < cr.matrix.n(); ++k) {
      w[std::string(metrics::metric_name(cr.matrix.criteria[k].metric))] = cr.weights[k];
    }
    nlohmann::json dropped = nlohmann::json::array();
    for (const auto& d : cr.dropped) dropped.push_back(std::string(metrics::metric_name(d.metric)));
    ctxs.push_back({{"zone", cr.matrix.context.zone},
                    {"season", cr.matrix.context.season},
                    {"weights", w},
                    {"dropped", dropped}});
  }
  j["contexts"] = ctxs;
  return j;
}

}  // namespace climdown::ranking
