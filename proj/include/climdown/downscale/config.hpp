#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include <nlohmann/json.hpp>

namespace climdown::downscale {

enum class ArchKind { kCnnLstm, kConvLstm, kVit, kGeoStaNet };
std::string_view to_string(ArchKind k);
ArchKind parse_arch(std::string_view s);
inline constexpr ArchKind kAllArchs[] = {ArchKind::kCnnLstm, ArchKind::kConvLstm, ArchKind::kVit,
                                         ArchKind::kGeoStaNet};

/// GeoSTANet temporal stage: the encoder applied recurrently to the first-frame state, or
/// self-attention across all frames of each patch.
enum class TemporalMode { kRecurrent, kAttention };
std::string_view to_string(TemporalMode m);
TemporalMode parse_temporal(std::string_view s);

struct ArchConfig {
  ArchKind kind = ArchKind::kCnnLstm;
  std::size_t kernel_radius = 1;   // conv kernels are (2p+1) x (2p+1)
  std::size_t conv_channels = 8;   // CNN feature maps; ConvLSTM hidden channels
  std::size_t up_channels = 64;    // ConvLSTM 1x1 projection ahead of the upsampling layer
  std::size_t lstm_hidden = 32;    // CNN-LSTM
  std::size_t patch = 4;           // ViT / GeoSTANet, in coarse cells
  std::size_t embed = 64;
  std::size_t heads = 4;
  std::size_t layers = 2;
  std::size_t mlp_hidden = 128;
  double alpha = 0.5;              // imbalance weight (GeoSTANet loss)
  TemporalMode temporal = TemporalMode::kRecurrent;
  bool geo = true;                 // GeoSTANet coordinate encoding
  bool batch_norm = true;          // ConvLSTM
  std::uint64_t seed = 0;

  std::size_t kernel() const { return 2 * kernel_radius + 1; }
  /// Throws ValidationError on nonsensical sizes.
  void validate() const;
};

enum class LossKind { kMse, kImbalance };
std::string_view to_string(LossKind k);
LossKind parse_loss(std::string_view s);

struct TrainConfig {
  std::size_t epochs = 40;
  std::size_t batch_size = 8;
  double lr = 3e-3;
  std::string optimizer = "adam";
  std::optional<LossKind> loss;  // unset: imbalance for GeoSTANet, mse otherwise
  std::size_t patience = 0;      // epochs without validation gain before stopping; 0 = never
  std::uint64_t seed = 0;

  LossKind loss_for(ArchKind k) const;
  void validate() const;
};

void to_json(nlohmann::json& j, const ArchConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, ArchConfig& c);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// Desk-scale defaults for an architecture.
ArchConfig default_arch(ArchKind kind, std::uint64_t seed = 0);
/// Tiny sizes for gradient checks (patch 4, embed 16, one layer).
ArchConfig miniature_arch(ArchKind kind, std::uint64_t seed = 0);

}  // namespace climdown::downscale
