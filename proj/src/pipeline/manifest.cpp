#include "climdown/pipeline/manifest.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <memory>

#include <openssl/evp.h>

#include "climdown/error.hpp"
#include "climdown/pipeline/config.hpp"

namespace climdown::pipeline {

namespace fs = std::filesystem;

namespace {

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new(), EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1)
      throw std::runtime_error("sha256: digest init failed");
  }
  void update(const void* p, std::size_t n) { EVP_DigestUpdate(ctx_.get(), p, n); }
  std::string hex() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned len = 0;
    EVP_DigestFinal_ex(ctx_.get(), md.data(), &len);
    static const char* digits = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
      out += digits[md[i] >> 4];
      out += digits[md[i] & 15];
    }
    return out;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, void (*)(EVP_MD_CTX*)> ctx_;
};

nlohmann::json read_json_or_null(const fs::path& p) {
  std::ifstream in(p);
  if (!in) return nullptr;
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception&) {
    return nullptr;
  }
}

void write_json(const fs::path& p, const nlohmann::json& j) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("cannot write " + p.string());
}

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  Sha256 h;
  h.update(bytes.data(), bytes.size());
  return h.hex();
}

std::string sha256_file(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot read " + file.string());
  Sha256 h;
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return h.hex();
}

RunRecorder::RunRecorder(fs::path out_dir, const nlohmann::json& canonical_config, std::uint64_t seed)
    : out_(std::move(out_dir)), hash_(sha256_hex(canonical_config.dump())) {
  std::error_code ec;
  fs::create_directories(out_, ec);
  if (ec) throw IoError("cannot create output directory " + out_.string() + ": " + ec.message());
  manifest_ = read_json_or_null(out_ / "manifest.json");
  timings_ = read_json_or_null(out_ / "timings.json");
  if (!manifest_.is_object() || manifest_.value("config_hash", "") != hash_) {
    manifest_ = {{"schema_version", kSchemaVersion},
                 {"tool_version", kToolVersion},
                 {"config_hash", hash_},
                 {"seed", seed},
                 {"stages", nlohmann::json::object()}};
    timings_ = nullptr;
  }
  if (!timings_.is_object()) timings_ = {{"config_hash", hash_}, {"stages", nlohmann::json::object()}};
}

void RunRecorder::record(const std::string& stage, double wall_ms, const std::vector<std::string>& unchecked) {
  const fs::path dir = out_ / stage;
  std::vector<fs::path> files;
  if (fs::is_directory(dir)) {
    for (const auto& e : fs::recursive_directory_iterator(dir))
      if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  nlohmann::json sums = nlohmann::json::object();
  nlohmann::json skipped = nlohmann::json::array();
  for (const auto& f : files) {
    const auto rel = fs::relative(f, out_).generic_string();
    if (std::find(unchecked.begin(), unchecked.end(), f.filename().string()) != unchecked.end()) {
      skipped.push_back(rel);
    } else {
      sums[rel] = sha256_file(f);
    }
  }
  manifest_["stages"][stage] = {{"outputs", sums}, {"unchecked", skipped}};
  timings_["stages"][stage] = {{"wall_ms", wall_ms}};
}

void RunRecorder::flush() const {
  write_json(out_ / "manifest.json", manifest_);
  write_json(out_ / "timings.json", timings_);
}

}  // namespace climdown::pipeline
