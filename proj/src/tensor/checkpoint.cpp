#include "climdown/tensor/checkpoint.hpp"

#include <bit>
#include <fstream>

#include "climdown/error.hpp"

namespace climdown::tensor {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload is written in host order");

constexpr const char* kFormat = "climdown-checkpoint";
constexpr int kVersion = 1;

nlohmann::json layout(const ParameterSet& ps) {
  nlohmann::json entries = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& p : ps.params()) {
    entries.push_back({{"name", p.name}, {"kind", "param"}, {"shape", p.tensor.shape()},
                       {"offset", offset}, {"count", p.tensor.size()}});
    offset += p.tensor.size();
  }
  for (const auto& b : ps.buffers()) {
    entries.push_back({{"name", b.name}, {"kind", "buffer"}, {"shape", {b.values->size()}},
                       {"offset", offset}, {"count", b.values->size()}});
    offset += b.values->size();
  }
  return entries;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, const ParameterSet& ps,
                     const nlohmann::json& meta) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create checkpoint directory " + dir.string() + ": " + ec.message());
  const auto flat = ps.flat_values();
  {
    std::ofstream out(dir / "params.bin", std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(flat.data()),
              static_cast<std::streamsize>(flat.size() * sizeof(double)));
    if (!out) throw IoError("cannot write " + (dir / "params.bin").string());
  }
  nlohmann::json m{{"format", kFormat}, {"version", kVersion}, {"values", flat.size()},
                   {"entries", layout(ps)}, {"meta", meta}};
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  out << m.dump(2) << '\n';
  if (!out) throw IoError("cannot write " + (dir / "manifest.json").string());
}

namespace {

nlohmann::json read_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw IoError("cannot open checkpoint manifest " + (dir / "manifest.json").string());
  nlohmann::json m;
  try {
    in >> m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("checkpoint manifest: " + std::string(e.what()));
  }
  if (!m.is_object() || m.value("format", "") != kFormat || m.value("version", 0) != kVersion) {
    throw ValidationError("not a checkpoint manifest: " + (dir / "manifest.json").string());
  }
  return m;
}

}  // namespace

nlohmann::json read_checkpoint_meta(const std::filesystem::path& dir) {
  return read_manifest(dir).value("meta", nlohmann::json::object());
}

void load_checkpoint(const std::filesystem::path& dir, ParameterSet& ps) {
  const auto m = read_manifest(dir);
  if (m.at("entries") != layout(ps)) {
    throw ValidationError("checkpoint layout does not match the model built from its config");
  }
  const std::size_t total = m.at("values").get<std::size_t>();
  std::ifstream in(dir / "params.bin", std::ios::binary);
  if (!in) throw IoError("cannot open " + (dir / "params.bin").string());
  std::vector<double> flat(total);
  in.read(reinterpret_cast<char*>(flat.data()), static_cast<std::streamsize>(total * sizeof(double)));
  if (static_cast<std::size_t>(in.gcount()) != total * sizeof(double) || in.peek() != EOF) {
    throw ValidationError("checkpoint payload size does not match its manifest");
  }
  std::size_t off = 0;
  for (const auto& p : ps.params()) {
    auto t = p.tensor;
    auto dst = t.mutable_data();
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(off), dst.size(), dst.begin());
    off += dst.size();
  }
  for (const auto& b : ps.buffers()) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(off), b.values->size(), b.values->begin());
    off += b.values->size();
  }
}

}  // namespace climdown::tensor
