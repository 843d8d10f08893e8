#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace climdown::pipeline {

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& file);

/// Keeps <out>/manifest.json (config hash, tool version, per-stage output checksums) and
/// <out>/timings.json (per-stage wall time) up to date. The manifest holds nothing
/// run-dependent, so identical configs give byte-identical manifests. A manifest left by
/// a different config is discarded.
class RunRecorder {
 public:
  RunRecorder(std::filesystem::path out_dir, const nlohmann::json& canonical_config, std::uint64_t seed);

  const std::string& config_hash() const { return hash_; }
  const std::filesystem::path& out_dir() const { return out_; }

  /// Checksums every regular file under <out>/<stage>. Files named in `unchecked`
  /// (wall-clock logs) are listed without a checksum.
  void record(const std::string& stage, double wall_ms,
              const std::vector<std::string>& unchecked = {});
  /// Writes both files.
  void flush() const;

 private:
  std::filesystem::path out_;
  std::string hash_;
  nlohmann::json manifest_;
  nlohmann::json timings_;
};

}  // namespace climdown::pipeline
