#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "climdown/downscale/config.hpp"
#include "climdown/downscale/data.hpp"
#include "climdown/rng.hpp"
#include "climdown/tensor/ops.hpp"
#include "climdown/tensor/params.hpp"

namespace climdown::downscale {

using tensor::Tensor;

/// Common interface: normalised x[n, t, c, hc, wc] -> fine field [n, hf, wf].
class Downscaler {
 public:
  Downscaler(ArchConfig cfg, InputShape shape);
  virtual ~Downscaler() = default;
  Downscaler(const Downscaler&) = delete;
  Downscaler& operator=(const Downscaler&) = delete;

  const ArchConfig& config() const { return cfg_; }
  const InputShape& shape() const { return shape_; }
  tensor::ParameterSet& params() { return params_; }
  const tensor::ParameterSet& params() const { return params_; }

  /// `coords` is the [N, 2] patch-centre table (only GeoSTANet reads it); `training`
  /// selects batch statistics in batch-norm layers.
  virtual Tensor forward(const Tensor& x, const Tensor& coords, bool training) = 0;

 protected:
  void check_input(const Tensor& x) const;

  ArchConfig cfg_;
  InputShape shape_;
  tensor::ParameterSet params_;
};

/// Pre-norm encoder block: x + MHA(LN(x)), then + MLP(LN(.)).
struct TransformerBlock {
  Tensor ln1_g, ln1_b, w_qkv, b_qkv, w_o, b_o;
  Tensor ln2_g, ln2_b, w1, b1, w2, b2;
  std::size_t heads = 1;

  static TransformerBlock create(tensor::ParameterSet& ps, const std::string& prefix, std::size_t d,
                                 std::size_t heads, std::size_t mlp, Rng& rng);
  Tensor apply(const Tensor& x) const;  // [B, L, d]
};

/// Multi-head self-attention of x[B, L, d] with fused QKV projection.
Tensor multi_head_attention(const Tensor& x, const Tensor& w_qkv, const Tensor& b_qkv,
                            const Tensor& w_o, const Tensor& b_o, std::size_t heads);

/// [B, c, h, w] -> [B, (h/P)(w/P), c P P], patches row-major.
Tensor patchify(const Tensor& x, std::size_t patch);
/// [B, ph pw, q q] -> [B, ph q, pw q].
Tensor unpatchify(const Tensor& y, std::size_t ph, std::size_t pw, std::size_t q);

/// Per-frame conv stack, LSTM over time, dense head to the fine grid.
class CnnLstm final : public Downscaler {
 public:
  CnnLstm(ArchConfig cfg, InputShape shape);
  Tensor forward(const Tensor& x, const Tensor& coords, bool training) override;

 private:
  Tensor k1_, c1_, k2_, c2_;
  tensor::LstmParams lstm_;
  Tensor w_out_, b_out_;
  std::size_t feat_ = 0;
};

/// Two stacked ConvLSTM layers (batch norm on each input-gate convolution), transposed
/// convolution to the fine grid.
class ConvLstmNet final : public Downscaler {
 public:
  ConvLstmNet(ArchConfig cfg, InputShape shape);
  Tensor forward(const Tensor& x, const Tensor& coords, bool training) override;
  /// Final hidden state of the top layer, [n, H, hc, wc].
  Tensor encode(const Tensor& x, bool training);

  struct Layer {
    tensor::ConvLstmParams p;
    Tensor bn_g, bn_b;
    tensor::BatchNormState* bn = nullptr;
  };
  const std::vector<Layer>& layers() const { return layers_; }

 private:
  std::vector<Layer> layers_;
  Tensor k_proj_, b_proj_, k_up_, b_up_;
};

/// Patch tokens per frame, learned positions, encoder blocks, frame mean, per-token head.
class Vit final : public Downscaler {
 public:
  Vit(ArchConfig cfg, InputShape shape);
  Tensor forward(const Tensor& x, const Tensor& coords, bool training) override;
  /// Embeds raw patch vectors [B, N, cPP], adds `pos` [N, d] and runs the blocks.
  Tensor encode(const Tensor& tokens, const Tensor& pos) const;
  const Tensor& positions() const { return pos_; }

 private:
  Tensor w_e_, b_e_, pos_;
  std::vector<TransformerBlock> blocks_;
  Tensor lnf_g_, lnf_b_, w_head_, b_head_;
};

/// ViT embedding plus a coordinate encoding W_geo [2, d], a temporal stage, and a
/// transposed-convolution upsampler.
class GeoStaNet final : public Downscaler {
 public:
  GeoStaNet(ArchConfig cfg, InputShape shape);
  Tensor forward(const Tensor& x, const Tensor& coords, bool training) override;
  Tensor& w_geo() { return w_geo_; }

 private:
  Tensor w_e_, b_e_, pos_, w_geo_;
  std::vector<TransformerBlock> blocks_;
  Tensor lnf_g_, lnf_b_, k_up_, b_up_;
};

std::unique_ptr<Downscaler> make_downscaler(const ArchConfig& cfg, const InputShape& shape);

/// A network with the data transform it was trained under.
struct TrainedModel {
  std::unique_ptr<Downscaler> net;
  Normalizer norm;
  DomainBounds bounds;

  void save(const std::filesystem::path& dir, const nlohmann::json& extra = nullptr) const;
  static TrainedModel load(const std::filesystem::path& dir);

  /// Network input tensors for samples `idx` of `d`.
  Tensor coords_for(const Dataset& d) const;
  /// Fine fields in physical units, one per index, inference mode.
  std::vector<std::vector<double>> predict(const Dataset& d, std::span<const std::size_t> idx,
                                           std::size_t batch = 16) const;
};

}  // namespace climdown::downscale
