#include "climdown/pipeline/stages.hpp"

#include <algorithm>
#include <exception>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "climdown/downscale/benchmark.hpp"
#include "climdown/downscale/evaluate.hpp"
#include "climdown/error.hpp"
#include "climdown/geogrid/gcf.hpp"
#include "climdown/geogrid/ops.hpp"
#include "climdown/geogrid/synth.hpp"
#include "climdown/metrics/metrics.hpp"
#include "climdown/rng.hpp"

namespace climdown::pipeline {

namespace fs = std::filesystem;
using geogrid::DataCube;
using geogrid::ZoneMask;

namespace {

[[noreturn]] void rethrow_in(const std::string& where, const Error& e) {
  const std::string msg = where + ": " + e.what();
  switch (e.kind()) {
    case ErrorKind::kValidation: throw ValidationError(msg);
    case ErrorKind::kNumeric: throw NumericFault(msg);
    case ErrorKind::kIo: throw IoError(msg);
  }
  throw ValidationError(msg);
}

template <class F>
auto in_stage(const std::string& where, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    rethrow_in(where, e);
  }
}

void make_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create " + p.string() + ": " + ec.message());
}

/// Empties `dir` so a stage never leaves stale files behind.
void fresh_dir(const fs::path& dir) {
  std::error_code ec;
  fs::remove_all(dir, ec);
  make_dir(dir);
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + p.string());
  return out;
}

void write_text(const fs::path& p, const std::string& text) {
  auto out = open_out(p);
  out << text;
  if (!out) throw IoError("cannot write " + p.string());
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot read " + p.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(p.string() + ": " + e.what());
  }
}

DataCube onto(const DataCube& c, const geogrid::GridAxis& lat, const geogrid::GridAxis& lon) {
  if (c.lat() == lat && c.lon() == lon) return c;
  return geogrid::regrid_bilinear(c, lat, lon);
}

ZoneMask mask_onto(const ZoneMask& m, const geogrid::GridAxis& lat, const geogrid::GridAxis& lon) {
  if (m.lat() == lat && m.lon() == lon) return m;
  return geogrid::regrid_nearest(m, lat, lon);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

using CsvTable = std::vector<std::map<std::string, std::string>>;

CsvTable read_csv_table(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot read " + p.string());
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(p.string() + ": empty file");
  const auto header = split_csv(line);
  CsvTable rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size())
      throw ValidationError(p.string() + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(header.size()) + " fields");
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < cells.size(); ++i) row[header[i]] = cells[i];
    rows.push_back(std::move(row));
  }
  return rows;
}

double to_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError(what + ": not a number '" + s + "'");
  }
}

const std::string kAnnual(geogrid::season_name(geogrid::Season::kAnnual));
const std::string kOverall = geogrid::zone_name(geogrid::Zone::overall());

}  // namespace

// ---------------------------------------------------------------------------------------
// rank

std::vector<ranking::ContextReports> compute_context_reports(const PipelineConfig& cfg) {
  validate_rank_inputs(cfg);
  const auto obs = in_stage("ingest obs", [&] { return geogrid::read_cube(cfg.obs); });
  const auto mask = in_stage("ingest mask", [&] {
    return mask_onto(geogrid::read_mask(cfg.mask), obs.lat(), obs.lon());
  });
  std::vector<DataCube> models;
  for (const auto& m : cfg.models) {
    models.push_back(in_stage("regrid " + m.label, [&] {
      auto cube = geogrid::read_cube(m.path);
      if (cube.variable() != obs.variable())
        spdlog::warn("model '{}' holds {} but the observations hold {}", m.label, cube.variable(), obs.variable());
      return onto(cube, obs.lat(), obs.lon());
    }));
  }

  std::vector<ranking::ContextReports> out;
  for (const auto zone : cfg.zones) {
    for (const auto season : cfg.seasons) {
      ranking::Context ctx{geogrid::zone_name(zone), std::string(geogrid::season_name(season))};
      std::vector<ranking::ModelReport> reports(models.size());
      std::vector<std::exception_ptr> errors(models.size());
      const long nm = static_cast<long>(models.size());
#pragma omp parallel for schedule(static)
      for (long i = 0; i < nm; ++i) {
        try {
          reports[i] = {cfg.models[i].label, metrics::full_report(models[i], obs, mask, zone, season)};
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
      for (std::size_t i = 0; i < errors.size(); ++i) {
        if (!errors[i]) continue;
        try {
          std::rethrow_exception(errors[i]);
        } catch (const Error& e) {
          rethrow_in("metrics " + cfg.models[i].label + " [" + ctx.label() + "]", e);
        }
      }
      out.push_back({ctx, std::move(reports)});
    }
  }
  return out;
}

RankRun run_rank(const PipelineConfig& cfg, const fs::path& out) {
  const auto contexts = compute_context_reports(cfg);
  ranking::RankConfig rc;
  rc.criteria = cfg.criteria;
  rc.source = cfg.weight_source;
  rc.net = cfg.weightnet;
  rc.net_seed = cfg.seed;
  auto result = in_stage("rank", [&] { return ranking::rank_all(contexts, rc); });

  const fs::path dir = out / "rank";
  fresh_dir(dir);
  std::vector<metrics::ReportRow> rows;
  for (const auto& c : contexts)
    for (const auto& r : c.reports) rows.push_back({r.model, c.context.zone, c.context.season, r.report});
  {
    auto f = open_out(dir / "metrics.csv");
    metrics::write_reports_csv(f, rows);
  }
  {
    auto f = open_out(dir / "ranking.csv");
    ranking::write_ranking_csv(f, result);
  }
  {
    auto f = open_out(dir / "heatmap.csv");
    ranking::write_heatmap_csv(f, result);
  }
  {
    auto f = open_out(dir / "top5.csv");
    ranking::write_top_csv(f, result, 5);
  }
  write_text(dir / "weights.json", ranking::weights_json(result).dump(2) + "\n");

  // What the report stage needs to stay independent of the inputs.
  const auto obs = geogrid::read_cube(cfg.obs);
  geogrid::write_mask(mask_onto(geogrid::read_mask(cfg.mask), obs.lat(), obs.lon()), dir / "mask");
  nlohmann::json labels = nlohmann::json::array();
  for (const auto& m : cfg.models) labels.push_back(m.label);
  write_text(dir / "labels.json",
             nlohmann::json{{"labels", labels}, {"reference_date", geogrid::format_iso(obs.time().front())}}.dump(2) + "\n");
  return {std::move(result), dir};
}

// ---------------------------------------------------------------------------------------
// downscale

CubePair read_pair(const fs::path& dir) {
  return {geogrid::read_cube(dir / "coarse"), geogrid::read_cube(dir / "fine")};
}

void write_pair(const CubePair& pair, const fs::path& dir) {
  geogrid::write_cube(pair.coarse, dir / "coarse");
  geogrid::write_cube(pair.fine, dir / "fine");
}

namespace {

std::string top_ranked_model(const fs::path& run) {
  const auto path = run / "rank" / "ranking.csv";
  if (!fs::exists(path)) throw ValidationError("downscale: source top_ranked needs a finished rank stage in " + run.string());
  for (const auto& row : read_csv_table(path)) {
    if (row.at("zone") == kOverall && row.at("season") == kAnnual && row.at("rank") == "1") return row.at("model");
  }
  throw ValidationError("downscale: no " + kOverall + "/" + kAnnual + " ranking in " + path.string());
}

struct DownscaleData {
  downscale::Dataset data;
  ZoneMask mask;
};

DownscaleData load_downscale_data(const PipelineConfig& cfg, const fs::path& out) {
  const auto& ds = *cfg.downscale;
  if (ds.source == DownscaleSource::kSynthetic) {
    auto b = downscale::make_benchmark(ds.benchmark);
    return {std::move(b.data), std::move(b.mask)};
  }
  DataCube coarse = [&] {
    if (ds.source == DownscaleSource::kCubes) return geogrid::read_cube(ds.coarse);
    const auto label = top_ranked_model(out);
    const auto it = std::find_if(cfg.models.begin(), cfg.models.end(), [&](const auto& m) { return m.label == label; });
    if (it == cfg.models.end()) throw ValidationError("downscale: top-ranked model '" + label + "' is not configured");
    spdlog::info("downscaling the top-ranked model '{}'", label);
    return geogrid::read_cube(it->path);
  }();
  const auto fine = geogrid::read_cube(ds.source == DownscaleSource::kCubes ? ds.fine : cfg.obs);
  if (cfg.mask.empty()) throw ValidationError("downscale: a zone mask is required for cube sources");
  auto mask = mask_onto(geogrid::read_mask(cfg.mask), fine.lat(), fine.lon());
  auto data = downscale::build_dataset({coarse}, fine, ds.t, ds.stride, ds.max_samples);
  return {std::move(data), std::move(mask)};
}

downscale::TrainConfig train_config_for(const PipelineConfig& cfg) {
  auto tc = cfg.downscale->train;
  const auto& j = cfg.canonical;
  const bool explicit_seed = j.contains("downscale") && j["downscale"].contains("train") &&
                             j["downscale"]["train"].contains("seed");
  if (!explicit_seed) tc.seed = cfg.seed;
  return tc;
}

}  // namespace

DownscaleRun run_downscale(const PipelineConfig& cfg, const fs::path& out) {
  if (!cfg.downscale) throw ValidationError("config: no downscale section");
  const auto& ds = *cfg.downscale;
  const auto input = in_stage("downscale data", [&] { return load_downscale_data(cfg, out); });
  const auto split = downscale::benchmark_split(input.data.size());
  if (split.train.empty() || split.test.empty())
    throw ValidationError("downscale data: too few samples for a train/test split");
  const auto train_set = input.data.subset(split.train);
  const auto val_set = input.data.subset(split.val);
  const auto tc = train_config_for(cfg);

  const fs::path dir = out / "downscale";
  fresh_dir(dir);
  DownscaleRun run{{}, dir};
  std::vector<downscale::Prediction> preds;
  for (const auto kind : ds.archs) {
    const std::string name(downscale::to_string(kind));
    const auto arch = ds.arch_config(kind, cfg.seed);
    spdlog::info("training {} ({} train / {} val samples, {} epochs)", name, train_set.size(), val_set.size(), tc.epochs);
    auto outcome = in_stage("downscale train " + name, [&] {
      return downscale::train(arch, train_set, val_set, tc, dir / name / "checkpoint");
    });
    {
      auto f = open_out(dir / name / "train_log.csv");
      downscale::write_train_log_csv(f, outcome.log);
    }
    if (!outcome.log.fault.empty()) spdlog::error("{}: {}", name, outcome.log.fault);
    auto p = downscale::model_prediction(outcome.model, input.data, split.test, name);
    run.rows.push_back({name, downscale::field_rmse(input.data, split.test, p),
                        downscale::field_bias(input.data, split.test, p), outcome.log.best_epoch,
                        outcome.log.fault});
    preds.push_back(std::move(p));
  }
  auto base = downscale::baseline_prediction(input.data, split.test);
  run.rows.push_back({base.label, downscale::field_rmse(input.data, split.test, base),
                      downscale::field_bias(input.data, split.test, base), 0, ""});
  preds.push_back(std::move(base));

  const auto table = in_stage("downscale eval", [&] {
    return downscale::evaluate(input.data, split.test, preds, input.mask, cfg.zones, cfg.seasons);
  });
  {
    auto f = open_out(dir / "eval.csv");
    metrics::write_reports_csv(f, table);
  }
  {
    auto f = open_out(dir / "summary.csv");
    const double base_rmse = run.rows.back().test_rmse;
    f << "label,test_rmse,test_bias,best_epoch,beats_baseline,fault\n";
    for (const auto& r : run.rows) {
      f << r.label << ',' << metrics::format_double(r.test_rmse) << ',' << metrics::format_double(r.test_bias)
        << ',' << r.best_epoch << ',' << (r.label == "bilinear" ? "" : (r.test_rmse < base_rmse ? "1" : "0"))
        << ',' << r.fault << '\n';
    }
  }
  return run;
}

downscale::TrainOutcome train_on_pair(downscale::ArchKind kind, const nlohmann::json& config,
                                      const CubePair& pair, const fs::path& out) {
  const nlohmann::json j = config.is_null() ? nlohmann::json::object() : config;
  if (!j.is_object()) throw ValidationError("train config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    static const std::set<std::string> known{"arch", "train", "t", "stride", "max_samples", "seed"};
    if (!known.count(key)) throw ValidationError("train config: unknown key '" + key + "'");
  }
  const auto seed = j.value("seed", std::uint64_t{0});
  auto arch = downscale::default_arch(kind, seed);
  if (j.contains("arch")) {
    if (j["arch"].contains("kind")) throw ValidationError("train config: arch.kind comes from --arch");
    j["arch"].get_to(arch);
  }
  downscale::TrainConfig tc;
  tc.seed = seed;
  if (j.contains("train")) j["train"].get_to(tc);
  const auto data = downscale::build_dataset({pair.coarse}, pair.fine, j.value("t", std::size_t{4}),
                                             j.value("stride", std::size_t{1}), j.value("max_samples", std::size_t{0}));
  const auto split = downscale::benchmark_split(data.size());
  if (split.train.empty()) throw ValidationError("train: too few samples");
  make_dir(out);
  auto outcome = downscale::train(arch, data.subset(split.train), data.subset(split.val), tc, out);
  auto f = open_out(out / "train_log.csv");
  downscale::write_train_log_csv(f, outcome.log);
  return outcome;
}

std::vector<metrics::ReportRow> evaluate_on_pair(const fs::path& ckpt, const CubePair& pair, const ZoneMask& mask) {
  const auto model = downscale::TrainedModel::load(ckpt);
  const auto& shape = model.net->shape();
  const auto data = downscale::build_dataset({pair.coarse}, pair.fine, shape.t);
  if (data.shape.hc != shape.hc || data.shape.wc != shape.wc || data.shape.factor != shape.factor)
    throw ValidationError("eval: data grid does not match the checkpoint input shape");
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  const auto m = mask_onto(mask, pair.fine.lat(), pair.fine.lon());
  std::vector<downscale::Prediction> preds;
  preds.push_back(downscale::model_prediction(model, data, idx, std::string(downscale::to_string(model.net->config().kind))));
  preds.push_back(downscale::baseline_prediction(data, idx));
  return downscale::evaluate(data, idx, preds, m, geogrid::all_zones(), geogrid::all_seasons());
}

// ---------------------------------------------------------------------------------------
// report

void run_report(const fs::path& out) {
  const fs::path rank = out / "rank";
  if (!fs::exists(rank / "ranking.csv"))
    throw ValidationError("report: " + out.string() + " holds no ranking results");
  const auto rows = read_csv_table(rank / "ranking.csv");
  if (rows.empty()) throw ValidationError("report: ranking.csv is empty");
  const auto meta = read_json(rank / "labels.json");
  const auto labels = meta.at("labels").get<std::vector<std::string>>();
  const auto mask = geogrid::read_mask(rank / "mask");

  const fs::path dir = out / "report";
  fresh_dir(dir);

  // Contexts in first-appearance order, CC per (context, model).
  std::vector<std::pair<std::string, std::string>> contexts;
  std::map<std::pair<std::string, std::string>, std::map<std::string, double>> cc;
  std::map<std::pair<std::string, std::string>, std::string> top;
  for (const auto& r : rows) {
    const auto key = std::make_pair(r.at("zone"), r.at("season"));
    if (!cc.count(key)) contexts.push_back(key);
    cc[key][r.at("model")] = to_double(r.at("cc"), "ranking.csv cc");
    if (r.at("rank") == "1") top[key] = r.at("model");
  }

  {
    auto f = open_out(dir / "heatmap.csv");
    f << "model";
    for (const auto& [z, s] : contexts) f << ',' << z << '/' << s;
    f << '\n';
    for (const auto& m : labels) {
      f << m;
      for (const auto& k : contexts) {
        f << ',';
        const auto it = cc[k].find(m);
        if (it != cc[k].end()) f << metrics::format_double(it->second);
      }
      f << '\n';
    }
  }

  {
    // score: mean CC over models of the context itself (for the Overall zone this is the
    // pooled recomputation); zone_mean: for Overall rows, the mean of the per-zone scores.
    std::map<std::pair<std::string, std::string>, double> score;
    for (const auto& k : contexts) {
      double s = 0.0;
      for (const auto& [_, v] : cc[k]) s += v;
      score[k] = s / static_cast<double>(cc[k].size());
    }
    auto f = open_out(dir / "fig4_scores.csv");
    f << "zone,season,score,zone_mean,top_model,top_cc\n";
    for (const auto& k : contexts) {
      f << k.first << ',' << k.second << ',' << metrics::format_double(score[k]) << ',';
      if (k.first == kOverall) {
        double s = 0.0;
        std::size_t n = 0;
        for (const auto& o : contexts) {
          if (o.second == k.second && o.first != kOverall) {
            s += score[o];
            ++n;
          }
        }
        if (n) f << metrics::format_double(s / static_cast<double>(n));
      }
      f << ',' << top[k] << ',' << metrics::format_double(cc[k][top[k]]) << '\n';
    }
  }

  {
    std::vector<double> raster(mask.codes().size(), geogrid::kDefaultFill);
    for (std::size_t c = 0; c < raster.size(); ++c) {
      const int code = mask.codes()[c];
      if (code < 1 || code > geogrid::kMaxZoneCode) continue;
      const auto it = top.find({geogrid::zone_name(geogrid::Zone{code}), kAnnual});
      if (it == top.end()) continue;
      const auto pos = std::find(labels.begin(), labels.end(), it->second);
      if (pos == labels.end()) throw ValidationError("report: unknown model '" + it->second + "' in ranking.csv");
      raster[c] = static_cast<double>(pos - labels.begin());
    }
    const DataCube cube(mask.lat(), mask.lon(), {geogrid::parse_iso(meta.at("reference_date").get<std::string>())},
                        geogrid::Calendar::kStandard, "best_model", "1", std::move(raster));
    geogrid::write_cube(cube, dir / "fig5_best_model");
    write_text(dir / "fig5_labels.json", nlohmann::json{{"labels", labels}}.dump(2) + "\n");
  }

  const fs::path eval = out / "downscale" / "eval.csv";
  if (fs::exists(eval)) {
    std::ifstream in(eval);
    const auto table = metrics::read_reports_csv(in);
    auto f = open_out(dir / "downscale_table.csv");
    f << "label,zone,season,metric,value\n";
    for (const auto& r : table) {
      for (auto id : metrics::kAllMetrics) {
        f << r.model << ',' << r.zone << ',' << r.season << ',' << metrics::metric_name(id) << ',';
        if (const auto v = r.report.get(id)) f << metrics::format_double(*v);
        f << '\n';
      }
    }
  }
}

// ---------------------------------------------------------------------------------------
// fixture

void write_fixture(const fs::path& dir, const FixtureSpec& spec) {
  if (spec.fine % static_cast<std::size_t>(spec.factor) != 0) throw ValidationError("fixture: factor must divide the grid");
  geogrid::SynthSpec s;
  s.seed = spec.seed;
  s.coarse_factor = spec.factor;
  s.nt = spec.days;
  s.nlat = s.nlon = spec.fine;
  const auto pair = geogrid::synth_pair(s);
  // Observations carry no sub-grid detail, so the models differ from them only by the
  // defects put in below (smoothing alone would distort the extremes of every model).
  const auto& clean = pair.coarse;
  const auto obs = geogrid::regrid_bilinear(clean, pair.fine.lat(), pair.fine.lon());

  auto noisy_copy = [&](double bias, double sd, std::uint64_t stream) {
    Rng rng(spec.seed, stream);
    std::vector<double> v(clean.data().begin(), clean.data().end());
    for (auto& x : v) x += bias + sd * rng.normal();
    return clean.with_data(std::move(v));
  };
  // The biased model is the unbiased one shifted, so every shift-invariant score ties.
  const auto unbiased = noisy_copy(0.0, spec.model_noise, 1);
  std::vector<double> shifted(unbiased.data().begin(), unbiased.data().end());
  for (auto& x : shifted) x += spec.bias;
  const auto biased = unbiased.with_data(std::move(shifted));
  const auto noisy = noisy_copy(0.0, spec.noisy_sd, 2);

  make_dir(dir);
  geogrid::write_cube(obs, dir / "obs");
  geogrid::write_mask(geogrid::synth_zone_mask(obs.lat(), obs.lon(), spec.seed), dir / "mask");
  geogrid::write_cube(unbiased, dir / "models" / "unbiased");
  geogrid::write_cube(biased, dir / "models" / "biased");
  geogrid::write_cube(noisy, dir / "models" / "noisy");
  write_pair({pair.coarse, pair.fine}, dir / "pair");

  const nlohmann::json cfg = {
      {"schema_version", kSchemaVersion},
      {"seed", spec.seed},
      {"obs", "obs"},
      {"mask", "mask"},
      {"models",
       {{{"label", "unbiased"}, {"path", "models/unbiased"}},
        {{"label", "biased"}, {"path", "models/biased"}},
        {{"label", "noisy"}, {"path", "models/noisy"}}}},
      {"weight_source", "weightnet"},
      {"downscale", {{"source", "synthetic"}}},
  };
  write_text(dir / "config.json", cfg.dump(2) + "\n");
}

}  // namespace climdown::pipeline
