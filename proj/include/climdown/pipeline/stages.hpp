#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "climdown/downscale/data.hpp"
#include "climdown/downscale/train.hpp"
#include "climdown/geogrid/grid.hpp"
#include "climdown/metrics/report_io.hpp"
#include "climdown/pipeline/config.hpp"
#include "climdown/ranking/rank.hpp"

namespace climdown::pipeline {

// Run directory layout:
//   config.json  manifest.json  timings.json
//   rank/       metrics.csv ranking.csv heatmap.csv top5.csv weights.json labels.json mask/
//   downscale/  <arch>/checkpoint/ <arch>/train_log.csv eval.csv summary.csv
//   report/     heatmap.csv fig4_scores.csv fig5_best_model/ fig5_labels.json downscale_table.csv

/// Metric reports of every model in every configured (zone, season), models regridded
/// onto the observation grid first.
std::vector<ranking::ContextReports> compute_context_reports(const PipelineConfig& cfg);

struct RankRun {
  ranking::RankOutput ranking;
  std::filesystem::path dir;
};
RankRun run_rank(const PipelineConfig& cfg, const std::filesystem::path& out);

struct ArchSummary {
  std::string label;  // arch name or "bilinear"
  double test_rmse = 0.0;
  double test_bias = 0.0;
  std::size_t best_epoch = 0;
  std::string fault;
};

struct DownscaleRun {
  std::vector<ArchSummary> rows;  // configured archs in order, then the baseline
  std::filesystem::path dir;
};
DownscaleRun run_downscale(const PipelineConfig& cfg, const std::filesystem::path& out);

/// Plot-ready bundles from an existing run directory.
void run_report(const std::filesystem::path& out);

/// Coarse/fine pair stored as <dir>/coarse and <dir>/fine.
struct CubePair {
  geogrid::DataCube coarse;
  geogrid::DataCube fine;
};
CubePair read_pair(const std::filesystem::path& dir);
void write_pair(const CubePair& pair, const std::filesystem::path& dir);

/// Standalone training (the `downscale train` command). The config document may hold
/// "arch" (overrides), "train", "t", "stride", "max_samples" and "seed".
downscale::TrainOutcome train_on_pair(downscale::ArchKind kind, const nlohmann::json& config,
                                      const CubePair& pair, const std::filesystem::path& out);
/// Evaluates a checkpoint and the bilinear baseline on every window of a pair.
std::vector<metrics::ReportRow> evaluate_on_pair(const std::filesystem::path& ckpt, const CubePair& pair,
                                                 const geogrid::ZoneMask& mask);

/// The bundled ranking fixture: observations, a zone mask, three coarse models (unbiased,
/// +2 degC bias, high noise), a coarse/fine pair for standalone training and a config.json
/// tying them together.
struct FixtureSpec {
  std::uint64_t seed = 7;
  std::size_t fine = 32;  // fine grid is fine x fine
  int factor = 4;
  std::size_t days = 730;
  double model_noise = 0.3;
  double noisy_sd = 2.0;
  double bias = 2.0;
};
void write_fixture(const std::filesystem::path& dir, const FixtureSpec& spec = {});

struct SelfCheck {
  std::string name;
  bool ok = false;
  std::string detail;
};
/// Fast built-in sanity checks of the numeric core.
std::vector<SelfCheck> selftest();

}  // namespace climdown::pipeline
