#include "climdown/downscale/config.hpp"

#include <set>
#include <string>

#include "climdown/error.hpp"
#include "climdown/tensor/optim.hpp"

namespace climdown::downscale {

std::string_view to_string(ArchKind k) {
  switch (k) {
    case ArchKind::kCnnLstm: return "cnn_lstm";
    case ArchKind::kConvLstm: return "convlstm";
    case ArchKind::kVit: return "vit";
    case ArchKind::kGeoStaNet: return "geostanet";
  }
  return "?";
}

ArchKind parse_arch(std::string_view s) {
  for (auto k : kAllArchs)
    if (to_string(k) == s) return k;
  throw ValidationError("unknown architecture '" + std::string(s) +
                        "' (expected cnn_lstm, convlstm, vit or geostanet)");
}

std::string_view to_string(TemporalMode m) {
  return m == TemporalMode::kRecurrent ? "recurrent" : "attention";
}

TemporalMode parse_temporal(std::string_view s) {
  if (s == "recurrent") return TemporalMode::kRecurrent;
  if (s == "attention") return TemporalMode::kAttention;
  throw ValidationError("unknown temporal mode '" + std::string(s) + "'");
}

std::string_view to_string(LossKind k) { return k == LossKind::kMse ? "mse" : "imbalance_weighted_mse"; }

LossKind parse_loss(std::string_view s) {
  if (s == "mse") return LossKind::kMse;
  if (s == "imbalance_weighted_mse") return LossKind::kImbalance;
  throw ValidationError("unknown loss '" + std::string(s) + "'");
}

void ArchConfig::validate() const {
  auto positive = [](std::size_t v, const char* what) {
    if (v == 0) throw ValidationError(std::string("arch config: ") + what + " must be positive");
  };
  positive(conv_channels, "conv_channels");
  positive(up_channels, "up_channels");
  positive(lstm_hidden, "lstm_hidden");
  positive(patch, "patch");
  positive(embed, "embed");
  positive(heads, "heads");
  positive(layers, "layers");
  positive(mlp_hidden, "mlp_hidden");
  if (embed % heads != 0) {
    throw ValidationError("arch config: embed " + std::to_string(embed) + " not divisible by heads " +
                          std::to_string(heads));
  }
  if (!(alpha >= 0.0)) throw ValidationError("arch config: alpha must be >= 0");
}

LossKind TrainConfig::loss_for(ArchKind k) const {
  if (loss) return *loss;
  return k == ArchKind::kGeoStaNet ? LossKind::kImbalance : LossKind::kMse;
}

void TrainConfig::validate() const {
  if (epochs == 0 || batch_size == 0) throw ValidationError("train config: epochs and batch_size must be positive");
  if (!(lr > 0.0)) throw ValidationError("train config: lr must be positive");
  (void)tensor::parse_optimizer(optimizer);
}

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const char* what) {
  if (!j.is_object()) throw ValidationError(std::string(what) + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ValidationError(std::string(what) + ": unknown key '" + key + "'");
  }
}

template <class T>
void read(const nlohmann::json& j, const char* key, T& out, const char* what) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError(std::string(what) + ": bad value for '" + key + "'");
  }
}

}  // namespace

void to_json(nlohmann::json& j, const ArchConfig& c) {
  j = {{"kind", to_string(c.kind)},
       {"kernel_radius", c.kernel_radius},
       {"conv_channels", c.conv_channels},
       {"up_channels", c.up_channels},
       {"lstm_hidden", c.lstm_hidden},
       {"patch", c.patch},
       {"embed", c.embed},
       {"heads", c.heads},
       {"layers", c.layers},
       {"mlp_hidden", c.mlp_hidden},
       {"alpha", c.alpha},
       {"temporal", to_string(c.temporal)},
       {"geo", c.geo},
       {"batch_norm", c.batch_norm},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, ArchConfig& c) {
  static const std::set<std::string> known{"kind",  "kernel_radius", "conv_channels", "up_channels", "lstm_hidden",
                                           "patch", "embed",         "heads",         "layers",
                                           "mlp_hidden", "alpha",    "temporal",      "geo",
                                           "batch_norm", "seed"};
  reject_unknown(j, known, "arch config");
  std::string kind(to_string(c.kind)), temporal(to_string(c.temporal));
  read(j, "kind", kind, "arch config");
  c.kind = parse_arch(kind);
  read(j, "kernel_radius", c.kernel_radius, "arch config");
  read(j, "conv_channels", c.conv_channels, "arch config");
  read(j, "up_channels", c.up_channels, "arch config");
  read(j, "lstm_hidden", c.lstm_hidden, "arch config");
  read(j, "patch", c.patch, "arch config");
  read(j, "embed", c.embed, "arch config");
  read(j, "heads", c.heads, "arch config");
  read(j, "layers", c.layers, "arch config");
  read(j, "mlp_hidden", c.mlp_hidden, "arch config");
  read(j, "alpha", c.alpha, "arch config");
  read(j, "temporal", temporal, "arch config");
  c.temporal = parse_temporal(temporal);
  read(j, "geo", c.geo, "arch config");
  read(j, "batch_norm", c.batch_norm, "arch config");
  read(j, "seed", c.seed, "arch config");
  c.validate();
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"epochs", c.epochs},         {"batch_size", c.batch_size}, {"lr", c.lr},
       {"optimizer", c.optimizer},   {"patience", c.patience},     {"seed", c.seed}};
  j["loss"] = c.loss ? nlohmann::json(to_string(*c.loss)) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  static const std::set<std::string> known{"epochs", "batch_size", "lr",  "optimizer",
                                           "loss",   "patience",   "seed"};
  reject_unknown(j, known, "train config");
  read(j, "epochs", c.epochs, "train config");
  read(j, "batch_size", c.batch_size, "train config");
  read(j, "lr", c.lr, "train config");
  read(j, "optimizer", c.optimizer, "train config");
  read(j, "patience", c.patience, "train config");
  read(j, "seed", c.seed, "train config");
  if (j.contains("loss")) {
    if (j["loss"].is_null()) {
      c.loss.reset();
    } else {
      std::string s;
      read(j, "loss", s, "train config");
      c.loss = parse_loss(s);
    }
  }
  c.validate();
}

ArchConfig default_arch(ArchKind kind, std::uint64_t seed) {
  ArchConfig c;
  c.kind = kind;
  c.seed = seed;
  return c;
}

ArchConfig miniature_arch(ArchKind kind, std::uint64_t seed) {
  ArchConfig c;
  c.kind = kind;
  c.seed = seed;
  c.conv_channels = 2;
  c.up_channels = 4;
  c.lstm_hidden = 4;
  c.patch = 4;
  c.embed = 16;
  c.heads = 2;
  c.layers = 1;
  c.mlp_hidden = 8;
  return c;
}

}  // namespace climdown::downscale
