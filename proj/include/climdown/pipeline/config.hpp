#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "climdown/downscale/benchmark.hpp"
#include "climdown/downscale/config.hpp"
#include "climdown/geogrid/grid.hpp"
#include "climdown/ranking/rank.hpp"

namespace climdown::pipeline {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";

struct ModelInput {
  std::string label;
  std::filesystem::path path;  // GCF directory
};

enum class DownscaleSource {
  kSynthetic,  // the bundled benchmark
  kTopRanked,  // the best Overall/ANNUAL model's cube against the observations
  kCubes,      // an explicit coarse/fine pair
};

struct DownscaleSection {
  DownscaleSource source = DownscaleSource::kSynthetic;
  downscale::BenchmarkSpec benchmark;
  std::filesystem::path coarse, fine;  // kCubes
  std::size_t t = 4;
  std::size_t stride = 1;
  std::size_t max_samples = 0;
  std::vector<downscale::ArchKind> archs{std::begin(downscale::kAllArchs),
                                         std::end(downscale::kAllArchs)};
  std::map<std::string, nlohmann::json> arch_overrides;  // keyed by arch name
  downscale::TrainConfig train;

  downscale::ArchConfig arch_config(downscale::ArchKind kind, std::uint64_t seed) const;
};

struct PipelineConfig {
  int schema_version = kSchemaVersion;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;  // may be empty; the CLI then falls back to the env

  std::filesystem::path obs;
  std::vector<ModelInput> models;
  std::filesystem::path mask;

  std::vector<ranking::Criterion> criteria = ranking::default_criteria();
  ranking::WeightSource weight_source = ranking::WeightSource::kWeightNet;
  ranking::WeightNetConfig weightnet;
  std::vector<geogrid::Zone> zones = geogrid::all_zones();
  std::vector<geogrid::Season> seasons = geogrid::all_seasons();

  std::optional<DownscaleSection> downscale;

  /// The parsed document, canonicalised (key-sorted) with resolved paths. Its hash
  /// identifies the run.
  nlohmann::json canonical;
};

/// Parses a config document. Relative paths resolve against `base_dir`. Throws
/// ValidationError ("config: ...") on schema problems; does not touch the filesystem.
PipelineConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
PipelineConfig load_config(const std::filesystem::path& file);

/// Pre-flight checks for the ranking stage: inputs exist, labels are unique.
void validate_rank_inputs(const PipelineConfig& cfg);

}  // namespace climdown::pipeline
