#include "climdown/pipeline/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "climdown/error.hpp"

namespace climdown::pipeline {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw ValidationError("config: " + msg); }

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) fail(where + " must be an object");
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) fail("unknown key '" + key + "' in " + where);
}

template <class T>
T get(const nlohmann::json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    fail("bad or missing '" + std::string(key) + "' in " + where);
  }
}

template <class T>
void get_opt(const nlohmann::json& j, const char* key, T& out, const std::string& where) {
  if (j.contains(key)) out = get<T>(j, key, where);
}

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) fail("empty path");
  const fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

downscale::BenchmarkSpec parse_benchmark(const nlohmann::json& j) {
  reject_unknown(j, {"seed", "samples", "t", "coarse", "factor", "stride", "bias", "noise_sd"},
                 "downscale.benchmark");
  downscale::BenchmarkSpec b;
  const std::string w = "downscale.benchmark";
  get_opt(j, "seed", b.seed, w);
  get_opt(j, "samples", b.samples, w);
  get_opt(j, "t", b.t, w);
  get_opt(j, "coarse", b.coarse, w);
  get_opt(j, "factor", b.factor, w);
  get_opt(j, "stride", b.stride, w);
  get_opt(j, "bias", b.bias, w);
  get_opt(j, "noise_sd", b.noise_sd, w);
  if (b.samples < 5 || b.t == 0 || b.coarse == 0 || b.factor < 2 || b.stride == 0)
    fail("downscale.benchmark sizes out of range");
  return b;
}

DownscaleSection parse_downscale(const nlohmann::json& j, const fs::path& base) {
  reject_unknown(j, {"source", "benchmark", "coarse", "fine", "t", "stride", "max_samples", "archs",
                     "arch_overrides", "train"},
                 "downscale");
  DownscaleSection d;
  const std::string w = "downscale";
  const auto source = j.contains("source") ? get<std::string>(j, "source", w) : "synthetic";
  if (source == "synthetic") {
    d.source = DownscaleSource::kSynthetic;
  } else if (source == "top_ranked") {
    d.source = DownscaleSource::kTopRanked;
  } else if (source == "cubes") {
    d.source = DownscaleSource::kCubes;
    d.coarse = resolve(base, get<std::string>(j, "coarse", w));
    d.fine = resolve(base, get<std::string>(j, "fine", w));
  } else {
    fail("downscale.source must be synthetic, top_ranked or cubes");
  }
  if (j.contains("benchmark")) d.benchmark = parse_benchmark(j["benchmark"]);
  get_opt(j, "t", d.t, w);
  get_opt(j, "stride", d.stride, w);
  get_opt(j, "max_samples", d.max_samples, w);
  if (d.t == 0 || d.stride == 0) fail("downscale.t and downscale.stride must be positive");
  if (j.contains("archs")) {
    d.archs.clear();
    for (const auto& name : get<std::vector<std::string>>(j, "archs", w)) {
      const auto k = downscale::parse_arch(name);
      if (std::find(d.archs.begin(), d.archs.end(), k) != d.archs.end()) fail("arch '" + name + "' listed twice");
      d.archs.push_back(k);
    }
    if (d.archs.empty()) fail("downscale.archs is empty");
  }
  if (j.contains("arch_overrides")) {
    const auto& o = j["arch_overrides"];
    if (!o.is_object()) fail("downscale.arch_overrides must be an object");
    for (const auto& [name, val] : o.items()) {
      downscale::parse_arch(name);
      if (val.contains("kind")) fail("arch_overrides." + name + " may not set 'kind'");
      d.arch_overrides[name] = val;
    }
  }
  if (j.contains("train")) d.train = j["train"].get<downscale::TrainConfig>();
  // Overrides are checked eagerly so bad keys fail before any training starts.
  for (auto k : d.archs) d.arch_config(k, 0);
  return d;
}

}  // namespace

downscale::ArchConfig DownscaleSection::arch_config(downscale::ArchKind kind, std::uint64_t seed) const {
  auto cfg = downscale::default_arch(kind, seed);
  const auto it = arch_overrides.find(std::string(downscale::to_string(kind)));
  if (it != arch_overrides.end()) it->second.get_to(cfg);
  return cfg;
}

namespace {

PipelineConfig parse_config_impl(const nlohmann::json& j, const fs::path& base_dir) {
  reject_unknown(j, {"schema_version", "seed", "output_dir", "obs", "models", "mask", "criteria",
                     "weight_source", "weightnet", "zones", "seasons", "downscale"},
                 "config");
  PipelineConfig c;
  const std::string w = "config";
  if (!j.contains("schema_version")) fail("missing schema_version");
  c.schema_version = get<int>(j, "schema_version", w);
  if (c.schema_version != kSchemaVersion)
    fail("unsupported schema_version " + std::to_string(c.schema_version) + " (expected " +
         std::to_string(kSchemaVersion) + ")");
  get_opt(j, "seed", c.seed, w);
  if (j.contains("output_dir")) c.output_dir = resolve(base_dir, get<std::string>(j, "output_dir", w));
  if (j.contains("obs")) c.obs = resolve(base_dir, get<std::string>(j, "obs", w));
  if (j.contains("mask")) c.mask = resolve(base_dir, get<std::string>(j, "mask", w));
  if (j.contains("models")) {
    if (!j["models"].is_array()) fail("models must be an array");
    std::set<std::string> seen;
    for (const auto& m : j["models"]) {
      reject_unknown(m, {"label", "path"}, "models[]");
      ModelInput in{get<std::string>(m, "label", "models[]"), resolve(base_dir, get<std::string>(m, "path", "models[]"))};
      if (in.label.empty() || in.label.find_first_of(",/\n") != std::string::npos)
        fail("model label '" + in.label + "' is empty or contains ',', '/' or a newline");
      if (!seen.insert(in.label).second) fail("duplicate model label '" + in.label + "'");
      c.models.push_back(std::move(in));
    }
  }
  if (j.contains("criteria")) c.criteria = ranking::parse_criteria(get<std::vector<std::string>>(j, "criteria", w));
  if (j.contains("weight_source")) c.weight_source = ranking::parse_weight_source(get<std::string>(j, "weight_source", w));
  if (j.contains("weightnet")) {
    const auto& n = j["weightnet"];
    reject_unknown(n, {"lr", "batch_size", "epochs", "sgd_warmup_epochs"}, "weightnet");
    get_opt(n, "lr", c.weightnet.lr, "weightnet");
    get_opt(n, "batch_size", c.weightnet.batch_size, "weightnet");
    get_opt(n, "epochs", c.weightnet.epochs, "weightnet");
    get_opt(n, "sgd_warmup_epochs", c.weightnet.sgd_warmup_epochs, "weightnet");
    if (!(c.weightnet.lr > 0) || c.weightnet.batch_size == 0) fail("weightnet lr and batch_size must be positive");
  }
  if (j.contains("zones")) {
    c.zones.clear();
    for (const auto& z : get<std::vector<std::string>>(j, "zones", w)) c.zones.push_back(geogrid::parse_zone(z));
    if (c.zones.empty()) fail("zones is empty");
  }
  if (j.contains("seasons")) {
    c.seasons.clear();
    for (const auto& s : get<std::vector<std::string>>(j, "seasons", w)) c.seasons.push_back(geogrid::parse_season(s));
    if (c.seasons.empty()) fail("seasons is empty");
  }
  if (j.contains("downscale")) c.downscale = parse_downscale(j["downscale"], base_dir);
  c.weightnet.seed = c.seed;
  c.canonical = j;
  return c;
}

}  // namespace

PipelineConfig parse_config(const nlohmann::json& j, const fs::path& base_dir) {
  try {
    return parse_config_impl(j, base_dir);
  } catch (const ValidationError& e) {
    if (std::string_view(e.what()).starts_with("config:")) throw;
    throw ValidationError(std::string("config: ") + e.what());
  }
}

PipelineConfig load_config(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open config " + file.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    fail(file.string() + ": " + e.what());
  }
  return parse_config(j, file.parent_path());
}

void validate_rank_inputs(const PipelineConfig& cfg) {
  auto need = [](const fs::path& p, const std::string& what) {
    if (p.empty()) fail(what + " not configured");
    if (!fs::is_directory(p)) fail(what + " '" + p.string() + "' does not exist");
  };
  need(cfg.obs, "obs");
  need(cfg.mask, "mask");
  if (cfg.models.size() < 2) fail("ranking needs at least two models");
  for (const auto& m : cfg.models) need(m.path, "model '" + m.label + "'");
}

}  // namespace climdown::pipeline
