// climdown: rank gridded climate models against observations and train downscalers.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <omp.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "climdown/error.hpp"
#include "climdown/geogrid/gcf.hpp"
#include "climdown/geogrid/ops.hpp"
#include "climdown/metrics/metrics.hpp"
#include "climdown/pipeline/config.hpp"
#include "climdown/pipeline/manifest.hpp"
#include "climdown/pipeline/stages.hpp"

namespace fs = std::filesystem;
using namespace climdown;

namespace {

struct Globals {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  int jobs = 0;
  bool verbose = false;
};

pipeline::PipelineConfig load(const Globals& g) {
  if (g.config.empty()) throw ValidationError("--config is required");
  auto cfg = pipeline::load_config(g.config);
  if (g.seed) {
    cfg.seed = *g.seed;
    cfg.weightnet.seed = *g.seed;
    cfg.canonical["seed"] = *g.seed;
  }
  return cfg;
}

fs::path output_dir(const Globals& g, const pipeline::PipelineConfig& cfg) {
  if (!g.out.empty()) return g.out;
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  if (const char* env = std::getenv("CLIMDOWN_OUT"); env && *env) return env;
  throw ValidationError("no output directory: pass --out, set output_dir or CLIMDOWN_OUT");
}

template <class F>
double timed(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

class Run {
 public:
  explicit Run(const Globals& g) : cfg_(load(g)), out_(output_dir(g, cfg_)), rec_(out_, cfg_.canonical, cfg_.seed) {
    std::ofstream(out_ / "config.json", std::ios::binary | std::ios::trunc) << cfg_.canonical.dump(2) << '\n';
  }

  void rank() {
    const double ms = timed([&] {
      const auto r = pipeline::run_rank(cfg_, out_);
      for (const auto& c : r.ranking.contexts)
        spdlog::debug("{}: best {}", c.matrix.context.label(), c.result.best().model);
    });
    rec_.record("rank", ms);
    rec_.flush();
    spdlog::info("rank: wrote {}", (out_ / "rank").string());
  }

  bool downscale() {
    pipeline::DownscaleRun run;
    const double ms = timed([&] { run = pipeline::run_downscale(cfg_, out_); });
    rec_.record("downscale", ms, {"train_log.csv"});
    rec_.flush();
    const double base = run.rows.back().test_rmse;
    bool faulted = false;
    for (const auto& r : run.rows) {
      spdlog::info("{:>10}  test rmse {:.4f}  bias {:+.4f}{}", r.label, r.test_rmse, r.test_bias,
                   r.label != "bilinear" && r.test_rmse >= base ? "  (does not beat bilinear)" : "");
      faulted = faulted || !r.fault.empty();
    }
    return !faulted;
  }

  void report() {
    const double ms = timed([&] { pipeline::run_report(out_); });
    rec_.record("report", ms);
    rec_.flush();
    spdlog::info("report: wrote {}", (out_ / "report").string());
  }

 private:
  pipeline::PipelineConfig cfg_;
  fs::path out_;
  pipeline::RunRecorder rec_;
};

std::vector<geogrid::Zone> zones_from(const std::vector<std::string>& names) {
  if (names.empty()) return geogrid::all_zones();
  std::vector<geogrid::Zone> z;
  for (const auto& n : names) z.push_back(geogrid::parse_zone(n));
  return z;
}

std::vector<geogrid::Season> seasons_from(const std::vector<std::string>& names) {
  if (names.empty()) return geogrid::all_seasons();
  std::vector<geogrid::Season> s;
  for (const auto& n : names) s.push_back(geogrid::parse_season(n));
  return s;
}

nlohmann::json read_json_file(const std::string& path) {
  if (path.empty()) return nullptr;
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"climdown - CMIP-style model ranking and deep-learning downscaling"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "Pipeline config (JSON)");
  app.add_option("--out", g.out, "Output directory (default: config output_dir, then $CLIMDOWN_OUT)");
  app.add_option("--seed", g.seed, "Override the config seed");
  app.add_option("--jobs", g.jobs, "OpenMP threads (0 = runtime default)")->check(CLI::NonNegativeNumber);
  app.add_flag("-v,--verbose", g.verbose, "Debug logging");

  auto* ingest = app.add_subcommand("ingest", "Convert a date,lat,lon,value CSV to a GCF cube");
  std::string csv, ingest_out;
  geogrid::CsvOptions csv_opts;
  std::string calendar = "standard";
  ingest->add_option("--csv", csv, "Input CSV")->required()->check(CLI::ExistingFile);
  ingest->add_option("--to", ingest_out, "Output GCF directory")->required();
  ingest->add_option("--calendar", calendar, "standard, noleap or 360_day");
  ingest->add_option("--variable", csv_opts.variable, "Variable name");
  ingest->add_option("--units", csv_opts.units, "Units");

  auto* regrid = app.add_subcommand("regrid", "Bilinear regrid of a cube onto another cube's grid");
  std::string regrid_in, regrid_like, regrid_to;
  bool regrid_mask = false;
  regrid->add_option("--in", regrid_in, "Source GCF")->required();
  regrid->add_option("--like", regrid_like, "GCF whose grid is the target")->required();
  regrid->add_option("--to", regrid_to, "Output GCF directory")->required();
  regrid->add_flag("--mask", regrid_mask, "Treat the source as a zone mask (nearest neighbour)");

  auto* metrics_cmd = app.add_subcommand("metrics", "Skill metrics of one model per zone and season");
  std::string m_model, m_obs, m_mask, m_label = "model", m_report;
  std::vector<std::string> m_zones, m_seasons;
  metrics_cmd->add_option("--model", m_model, "Model GCF")->required();
  metrics_cmd->add_option("--obs", m_obs, "Observation GCF")->required();
  metrics_cmd->add_option("--mask", m_mask, "Zone mask GCF")->required();
  metrics_cmd->add_option("--label", m_label, "Row label");
  metrics_cmd->add_option("--zones", m_zones, "Zones (default all)");
  metrics_cmd->add_option("--seasons", m_seasons, "Seasons (default all)");
  metrics_cmd->add_option("--report", m_report, "Output CSV (default stdout)");

  auto* rank = app.add_subcommand("rank", "Regrid, score and rank the configured models");

  auto* ds = app.add_subcommand("downscale", "Train and evaluate downscalers");
  ds->require_subcommand(1);
  auto* ds_train = ds->add_subcommand("train", "Train one architecture on a coarse/fine pair");
  std::string arch_name, data_dir, ckpt_out, ds_config;
  ds_train->add_option("--arch", arch_name, "cnn_lstm, convlstm, vit or geostanet")->required();
  ds_train->add_option("--config", ds_config, "Training config (JSON)");
  ds_train->add_option("--data", data_dir, "Directory holding coarse/ and fine/ cubes")->required();
  ds_train->add_option("--out", ckpt_out, "Checkpoint directory")->required();
  auto* ds_eval = ds->add_subcommand("eval", "Evaluate a checkpoint against the bilinear baseline");
  std::string ckpt, eval_data, eval_mask, eval_report;
  ds_eval->add_option("--ckpt", ckpt, "Checkpoint directory")->required();
  ds_eval->add_option("--data", eval_data, "Directory holding coarse/ and fine/ cubes")->required();
  ds_eval->add_option("--mask", eval_mask, "Zone mask GCF")->required();
  ds_eval->add_option("--report", eval_report, "Output CSV")->required();
  auto* ds_run = ds->add_subcommand("run", "Train and evaluate every configured architecture");

  auto* report = app.add_subcommand("report", "Plot-ready tables from a run directory");
  std::string report_run;
  report->add_option("--run", report_run, "Run directory (default: --out)");

  auto* all = app.add_subcommand("run", "rank, downscale and report in one go");
  auto* selftest = app.add_subcommand("selftest", "Quick numeric sanity checks");
  auto* synth = app.add_subcommand("synth", "Write the bundled synthetic fixture");
  std::string synth_dir;
  pipeline::FixtureSpec fixture;
  synth->add_option("--to", synth_dir, "Fixture directory")->required();
  synth->add_option("--days", fixture.days, "Days of data");
  synth->add_option("--grid", fixture.fine, "Fine grid size");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  spdlog::set_default_logger(spdlog::stderr_color_mt("climdown"));
  spdlog::set_level(g.verbose ? spdlog::level::debug : spdlog::level::info);
  if (g.jobs > 0) omp_set_num_threads(g.jobs);

  try {
    if (*ingest) {
      csv_opts.calendar = geogrid::parse_calendar(calendar);
      const auto cube = geogrid::read_csv_cube(csv, csv_opts);
      geogrid::write_cube(cube, ingest_out);
      spdlog::info("ingest: {} x {} x {} cube -> {}", cube.nt(), cube.nlat(), cube.nlon(), ingest_out);
    } else if (*regrid) {
      const auto like = geogrid::read_cube(regrid_like);
      if (regrid_mask) {
        geogrid::write_mask(geogrid::regrid_nearest(geogrid::read_mask(regrid_in), like.lat(), like.lon()), regrid_to);
      } else {
        geogrid::write_cube(geogrid::regrid_bilinear(geogrid::read_cube(regrid_in), like.lat(), like.lon()), regrid_to);
      }
    } else if (*metrics_cmd) {
      const auto obs = geogrid::read_cube(m_obs);
      auto model = geogrid::read_cube(m_model);
      if (!(model.lat() == obs.lat() && model.lon() == obs.lon()))
        model = geogrid::regrid_bilinear(model, obs.lat(), obs.lon());
      auto mask = geogrid::read_mask(m_mask);
      if (!(mask.lat() == obs.lat() && mask.lon() == obs.lon())) mask = geogrid::regrid_nearest(mask, obs.lat(), obs.lon());
      std::vector<metrics::ReportRow> rows;
      for (const auto z : zones_from(m_zones))
        for (const auto s : seasons_from(m_seasons))
          rows.push_back({m_label, geogrid::zone_name(z), std::string(geogrid::season_name(s)),
                          metrics::full_report(model, obs, mask, z, s)});
      if (m_report.empty()) {
        metrics::write_reports_csv(std::cout, rows);
      } else {
        std::ofstream f(m_report, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot write " + m_report);
        metrics::write_reports_csv(f, rows);
      }
    } else if (*rank) {
      Run(g).rank();
    } else if (*ds_train) {
      const auto kind = downscale::parse_arch(arch_name);
      const auto outcome = pipeline::train_on_pair(kind, read_json_file(ds_config), pipeline::read_pair(data_dir), ckpt_out);
      if (!outcome.log.fault.empty()) throw NumericFault(outcome.log.fault);
      spdlog::info("train: best epoch {} of {}, checkpoint in {}", outcome.log.best_epoch, outcome.log.epochs.size(), ckpt_out);
    } else if (*ds_eval) {
      const auto rows = pipeline::evaluate_on_pair(ckpt, pipeline::read_pair(eval_data), geogrid::read_mask(eval_mask));
      std::ofstream f(eval_report, std::ios::binary | std::ios::trunc);
      if (!f) throw IoError("cannot write " + eval_report);
      metrics::write_reports_csv(f, rows);
    } else if (*ds_run) {
      if (!Run(g).downscale()) return exit_code(ErrorKind::kNumeric);
    } else if (*report) {
      const fs::path dir = report_run.empty() ? fs::path(g.out) : fs::path(report_run);
      if (dir.empty()) throw ValidationError("report: pass --run");
      if (!fs::exists(dir / "config.json")) throw ValidationError("report: " + dir.string() + " is not a run directory");
      Globals rg = g;
      rg.config = (dir / "config.json").string();
      rg.out = dir.string();
      Run(rg).report();
    } else if (*all) {
      Run r(g);
      r.rank();
      const bool ok = r.downscale();
      r.report();
      if (!ok) return exit_code(ErrorKind::kNumeric);
    } else if (*selftest) {
      bool ok = true;
      for (const auto& c : pipeline::selftest()) {
        std::cout << (c.ok ? "PASS " : "FAIL ") << c.name << (c.detail.empty() ? "" : " (" + c.detail + ")") << '\n';
        ok = ok && c.ok;
      }
      return ok ? 0 : 1;
    } else if (*synth) {
      pipeline::write_fixture(synth_dir, fixture);
      spdlog::info("synth: fixture in {} (config: {})", synth_dir, (fs::path(synth_dir) / "config.json").string());
    }
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    spdlog::error("{}", e.what());
    return exit_code(ErrorKind::kIo);
  } catch (const nlohmann::json::exception& e) {
    spdlog::error("{}", e.what());
    return exit_code(ErrorKind::kValidation);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
