#include "climdown/downscale/models.hpp"

#include <algorithm>
#include <cmath>

#include "climdown/error.hpp"
#include "climdown/tensor/checkpoint.hpp"

namespace climdown::downscale {

namespace tn = climdown::tensor;

namespace {

Tensor small_uniform(tn::Shape shape, double a, Rng& rng) {
  std::vector<double> v(tn::numel(shape));
  for (double& x : v) x = rng.uniform(-a, a);
  return Tensor::from(std::move(shape), std::move(v));
}

std::uint64_t arch_stream(ArchKind k) { return 0xd0 + static_cast<std::uint64_t>(k); }

void check_patch(const ArchConfig& cfg, const InputShape& s) {
  if (s.hc % cfg.patch != 0 || s.wc % cfg.patch != 0) {
    throw ValidationError("patch size " + std::to_string(cfg.patch) + " does not divide the coarse grid " +
                          std::to_string(s.hc) + "x" + std::to_string(s.wc));
  }
}

}  // namespace

Downscaler::Downscaler(ArchConfig cfg, InputShape shape) : cfg_(cfg), shape_(shape) {
  cfg_.validate();
  if (shape_.t == 0 || shape_.c == 0 || shape_.hc == 0 || shape_.wc == 0 || shape_.factor < 2)
    throw ValidationError("downscaler: invalid input shape");
}

void Downscaler::check_input(const Tensor& x) const {
  const auto& s = shape_;
  if (x.rank() != 5 || x.dim(1) != s.t || x.dim(2) != s.c || x.dim(3) != s.hc || x.dim(4) != s.wc) {
    throw ValidationError(std::string(to_string(cfg_.kind)) + ": expected input [n, " +
                          std::to_string(s.t) + ", " + std::to_string(s.c) + ", " +
                          std::to_string(s.hc) + ", " + std::to_string(s.wc) + "], got " +
                          tn::shape_str(x.shape()));
  }
}

// ---------------------------------------------------------------------------------------
// Shared transformer pieces

TransformerBlock TransformerBlock::create(tn::ParameterSet& ps, const std::string& prefix, std::size_t d,
                                          std::size_t heads, std::size_t mlp, Rng& rng) {
  TransformerBlock b;
  b.heads = heads;
  b.ln1_g = ps.add(prefix + ".ln1.g", Tensor::full({d}, 1.0));
  b.ln1_b = ps.add(prefix + ".ln1.b", Tensor::zeros({d}));
  b.w_qkv = ps.add(prefix + ".attn.w_qkv", tn::glorot_uniform({d, 3 * d}, d, d, rng));
  b.b_qkv = ps.add(prefix + ".attn.b_qkv", Tensor::zeros({3 * d}));
  b.w_o = ps.add(prefix + ".attn.w_o", tn::glorot_uniform({d, d}, d, d, rng));
  b.b_o = ps.add(prefix + ".attn.b_o", Tensor::zeros({d}));
  b.ln2_g = ps.add(prefix + ".ln2.g", Tensor::full({d}, 1.0));
  b.ln2_b = ps.add(prefix + ".ln2.b", Tensor::zeros({d}));
  b.w1 = ps.add(prefix + ".mlp.w1", tn::he_uniform({d, mlp}, d, rng));
  b.b1 = ps.add(prefix + ".mlp.b1", Tensor::zeros({mlp}));
  b.w2 = ps.add(prefix + ".mlp.w2", tn::glorot_uniform({mlp, d}, mlp, d, rng));
  b.b2 = ps.add(prefix + ".mlp.b2", Tensor::zeros({d}));
  return b;
}

Tensor TransformerBlock::apply(const Tensor& x) const {
  const auto y = tn::add(x, multi_head_attention(tn::layer_norm(x, ln1_g, ln1_b), w_qkv, b_qkv, w_o, b_o, heads));
  const auto h = tn::relu(tn::dense(tn::layer_norm(y, ln2_g, ln2_b), w1, b1));
  return tn::add(y, tn::dense(h, w2, b2));
}

Tensor multi_head_attention(const Tensor& x, const Tensor& w_qkv, const Tensor& b_qkv, const Tensor& w_o,
                            const Tensor& b_o, std::size_t heads) {
  const std::size_t B = x.dim(0), L = x.dim(1), d = x.dim(2), dk = d / heads;
  const auto qkv = tn::dense(x, w_qkv, b_qkv);  // [B, L, 3d]
  auto split = [&](std::size_t part) {
    const auto t = tn::reshape(tn::slice(qkv, 2, part * d, d), {B, L, heads, dk});
    return tn::reshape(tn::permute(t, {0, 2, 1, 3}), {B * heads, L, dk});
  };
  const auto a = tn::attention(split(0), split(1), split(2));  // [B h, L, dk]
  const auto merged = tn::reshape(tn::permute(tn::reshape(a, {B, heads, L, dk}), {0, 2, 1, 3}), {B, L, d});
  return tn::dense(merged, w_o, b_o);
}

Tensor patchify(const Tensor& x, std::size_t p) {
  const std::size_t B = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h % p || w % p) throw ValidationError("patchify: patch does not divide the grid");
  const auto t = tn::reshape(x, {B, c, h / p, p, w / p, p});
  return tn::reshape(tn::permute(t, {0, 2, 4, 1, 3, 5}), {B, (h / p) * (w / p), c * p * p});
}

Tensor unpatchify(const Tensor& y, std::size_t ph, std::size_t pw, std::size_t q) {
  const std::size_t B = y.dim(0);
  const auto t = tn::reshape(y, {B, ph, pw, q, q});
  return tn::reshape(tn::permute(t, {0, 1, 3, 2, 4}), {B, ph * q, pw * q});
}

// ---------------------------------------------------------------------------------------
// CNN-LSTM

CnnLstm::CnnLstm(ArchConfig cfg, InputShape shape) : Downscaler(cfg, shape) {
  Rng rng(cfg_.seed, arch_stream(cfg_.kind));
  const std::size_t k = cfg_.kernel(), C = cfg_.conv_channels, H = cfg_.lstm_hidden, c = shape_.c;
  k1_ = params_.add("conv1.k", tn::he_uniform({C, c, k, k}, c * k * k, rng));
  c1_ = params_.add("conv1.b", Tensor::zeros({C}));
  k2_ = params_.add("conv2.k", tn::he_uniform({C, C, k, k}, C * k * k, rng));
  c2_ = params_.add("conv2.b", Tensor::zeros({C}));
  const std::size_t pad = k / 2;
  const std::size_t h2 = (shape_.hc + 2 * pad - k) / 2 + 1, w2 = (shape_.wc + 2 * pad - k) / 2 + 1;
  feat_ = C * h2 * w2;
  lstm_.w_x = params_.add("lstm.w_x", tn::glorot_uniform({feat_, 4 * H}, feat_, 4 * H, rng));
  lstm_.w_h = params_.add("lstm.w_h", tn::glorot_uniform({H, 4 * H}, H, 4 * H, rng));
  std::vector<double> bias(4 * H, 0.0);
  std::fill(bias.begin() + static_cast<std::ptrdiff_t>(H), bias.begin() + static_cast<std::ptrdiff_t>(2 * H), 1.0);
  lstm_.b = params_.add("lstm.b", Tensor::from({4 * H}, std::move(bias)));
  const std::size_t out = shape_.target_size();
  w_out_ = params_.add("head.w", tn::glorot_uniform({H, out}, H, out, rng));
  b_out_ = params_.add("head.b", Tensor::zeros({out}));
}

Tensor CnnLstm::forward(const Tensor& x, const Tensor&, bool) {
  check_input(x);
  const std::size_t n = x.dim(0), t = shape_.t, H = cfg_.lstm_hidden;
  auto f = tn::reshape(x, {n * t, shape_.c, shape_.hc, shape_.wc});
  f = tn::relu(tn::conv2d(f, k1_, c1_, 1, tn::Padding::kSame));
  f = tn::relu(tn::conv2d(f, k2_, c2_, 2, tn::Padding::kSame));
  const auto seq = tn::reshape(f, {n, t, feat_});
  tn::LstmState st{Tensor::zeros({n, H}), Tensor::zeros({n, H})};
  for (std::size_t s = 0; s < t; ++s) {
    st = tn::lstm_cell(tn::reshape(tn::slice(seq, 1, s, 1), {n, feat_}), st, lstm_);
  }
  return tn::reshape(tn::dense(st.h, w_out_, b_out_), {n, shape_.hf(), shape_.wf()});
}

// ---------------------------------------------------------------------------------------
// ConvLSTM

ConvLstmNet::ConvLstmNet(ArchConfig cfg, InputShape shape) : Downscaler(cfg, shape) {
  Rng rng(cfg_.seed, arch_stream(cfg_.kind));
  const std::size_t k = cfg_.kernel(), H = cfg_.conv_channels;
  for (std::size_t l = 0; l < 2; ++l) {
    const std::string pre = "convlstm" + std::to_string(l + 1);
    const std::size_t cin = l == 0 ? shape_.c : H;
    Layer L;
    L.p.k_x = params_.add(pre + ".k_x", tn::glorot_uniform({4 * H, cin, k, k}, cin * k * k, H * k * k, rng));
    L.p.k_h = params_.add(pre + ".k_h", tn::glorot_uniform({4 * H, H, k, k}, H * k * k, H * k * k, rng));
    std::vector<double> bias(4 * H, 0.0);
    std::fill(bias.begin() + static_cast<std::ptrdiff_t>(H), bias.begin() + static_cast<std::ptrdiff_t>(2 * H), 1.0);
    L.p.b = params_.add(pre + ".b", Tensor::from({4 * H}, bias));
    if (cfg_.batch_norm) {
      // With batch norm the shift lives in beta (forget gate biased open as above).
      L.bn_g = params_.add(pre + ".bn.g", Tensor::full({4 * H}, 1.0));
      L.bn_b = params_.add(pre + ".bn.b", Tensor::from({4 * H}, bias));
      L.bn = &params_.add_batch_norm(pre + ".bn", 4 * H);
    }
    layers_.push_back(L);
  }
  const std::size_t f = shape_.factor;
  const std::size_t U = cfg_.up_channels;
  k_proj_ = params_.add("up.proj.k", tn::glorot_uniform({U, H, 1, 1}, H, U, rng));
  b_proj_ = params_.add("up.proj.b", Tensor::zeros({U}));
  // Kernel 2f at stride f: neighbouring output blocks overlap, so the layer can express
  // smooth (e.g. bilinear) interpolation rather than piecewise-constant blocks.
  k_up_ = params_.add("up.k", tn::glorot_uniform({U, 1, 2 * f, 2 * f}, U, 4 * f * f, rng));
  // Untied output bias, one per fine cell, like the bias of a dense output head.
  b_up_ = params_.add("up.b", Tensor::zeros({shape_.hf(), shape_.wf()}));
}

Tensor ConvLstmNet::encode(const Tensor& x, bool training) {
  check_input(x);
  const std::size_t n = x.dim(0), t = shape_.t, h = shape_.hc, w = shape_.wc, H = cfg_.conv_channels;
  Tensor seq = x;  // [n, t, c, h, w]
  Tensor last;
  for (auto& L : layers_) {
    const std::size_t cin = seq.dim(2);
    auto g = tn::conv2d(tn::reshape(seq, {n * t, cin, h, w}), L.p.k_x, L.p.b, 1, tn::Padding::kSame);
    if (L.bn) g = tn::batch_norm(g, L.bn_g, L.bn_b, *L.bn, training);
    g = tn::reshape(g, {n, t, 4 * H, h, w});
    tn::LstmState st{Tensor::zeros({n, H, h, w}), Tensor::zeros({n, H, h, w})};
    std::vector<Tensor> hs;
    for (std::size_t s = 0; s < t; ++s) {
      st = tn::convlstm_step(tn::reshape(tn::slice(g, 1, s, 1), {n, 4 * H, h, w}), st, L.p.k_h);
      hs.push_back(tn::reshape(st.h, {n, 1, H, h, w}));
    }
    last = st.h;
    seq = t == 1 ? hs.front() : tn::concat(hs, 1);
  }
  return last;
}

Tensor ConvLstmNet::forward(const Tensor& x, const Tensor&, bool training) {
  const auto h = tn::relu(tn::conv2d(encode(x, training), k_proj_, b_proj_, 1, tn::Padding::kSame));
  const std::size_t f = shape_.factor;
  auto y = tn::conv2d_transpose(h, k_up_, Tensor(), f);  // (h+1)f square; keep the centred hf
  y = tn::slice(tn::slice(y, 2, f / 2, shape_.hf()), 3, f / 2, shape_.wf());
  return tn::add(tn::reshape(y, {x.dim(0), shape_.hf(), shape_.wf()}), b_up_);
}

// ---------------------------------------------------------------------------------------
// ViT

Vit::Vit(ArchConfig cfg, InputShape shape) : Downscaler(cfg, shape) {
  check_patch(cfg_, shape_);
  Rng rng(cfg_.seed, arch_stream(cfg_.kind));
  const std::size_t P = cfg_.patch, d = cfg_.embed, in = shape_.c * P * P;
  const std::size_t N = (shape_.hc / P) * (shape_.wc / P), q = P * shape_.factor;
  w_e_ = params_.add("embed.w", tn::glorot_uniform({in, d}, in, d, rng));
  b_e_ = params_.add("embed.b", Tensor::zeros({d}));
  pos_ = params_.add("embed.pos", small_uniform({N, d}, 0.1, rng));
  for (std::size_t l = 0; l < cfg_.layers; ++l)
    blocks_.push_back(TransformerBlock::create(params_, "block" + std::to_string(l), d, cfg_.heads,
                                               cfg_.mlp_hidden, rng));
  lnf_g_ = params_.add("norm.g", Tensor::full({d}, 1.0));
  lnf_b_ = params_.add("norm.b", Tensor::zeros({d}));
  w_head_ = params_.add("head.w", tn::glorot_uniform({d, q * q}, d, q * q, rng));
  b_head_ = params_.add("head.b", Tensor::zeros({q * q}));
}

Tensor Vit::encode(const Tensor& tokens, const Tensor& pos) const {
  auto z = tn::add(tn::dense(tokens, w_e_, b_e_), pos);
  for (const auto& b : blocks_) z = b.apply(z);
  return z;
}

Tensor Vit::forward(const Tensor& x, const Tensor&, bool) {
  check_input(x);
  const std::size_t n = x.dim(0), t = shape_.t, P = cfg_.patch, d = cfg_.embed;
  const std::size_t ph = shape_.hc / P, pw = shape_.wc / P, q = P * shape_.factor;
  const auto tokens = patchify(tn::reshape(x, {n * t, shape_.c, shape_.hc, shape_.wc}), P);
  auto z = encode(tokens, pos_);                                  // [n t, N, d]
  z = tn::mean_axis(tn::reshape(z, {n, t, ph * pw, d}), 1);      // frames pooled
  z = tn::layer_norm(z, lnf_g_, lnf_b_);
  return unpatchify(tn::dense(z, w_head_, b_head_), ph, pw, q);
}

// ---------------------------------------------------------------------------------------
// GeoSTANet

GeoStaNet::GeoStaNet(ArchConfig cfg, InputShape shape) : Downscaler(cfg, shape) {
  check_patch(cfg_, shape_);
  Rng rng(cfg_.seed, arch_stream(cfg_.kind));
  const std::size_t P = cfg_.patch, d = cfg_.embed, in = shape_.c * P * P;
  const std::size_t N = (shape_.hc / P) * (shape_.wc / P), q = P * shape_.factor;
  w_e_ = params_.add("embed.w", tn::glorot_uniform({in, d}, in, d, rng));
  b_e_ = params_.add("embed.b", Tensor::zeros({d}));
  pos_ = params_.add("embed.pos", small_uniform({N, d}, 0.1, rng));
  for (std::size_t l = 0; l < cfg_.layers; ++l)
    blocks_.push_back(TransformerBlock::create(params_, "temporal" + std::to_string(l), d, cfg_.heads,
                                               cfg_.mlp_hidden, rng));
  lnf_g_ = params_.add("norm.g", Tensor::full({d}, 1.0));
  lnf_b_ = params_.add("norm.b", Tensor::zeros({d}));
  k_up_ = params_.add("up.k", tn::glorot_uniform({d, 1, q, q}, d, q * q, rng));
  b_up_ = params_.add("up.b", Tensor::zeros({1}));
  // Drawn last so that toggling `geo` leaves every other initial value unchanged.
  w_geo_ = params_.add("geo.w", tn::glorot_uniform({2, d}, 2, d, rng));
}

Tensor GeoStaNet::forward(const Tensor& x, const Tensor& coords, bool) {
  check_input(x);
  const std::size_t n = x.dim(0), t = shape_.t, P = cfg_.patch, d = cfg_.embed;
  const std::size_t ph = shape_.hc / P, pw = shape_.wc / P, N = ph * pw, q = P * shape_.factor;
  auto e = tn::add(tn::dense(patchify(tn::reshape(x, {n * t, shape_.c, shape_.hc, shape_.wc}), P), w_e_, b_e_),
                   pos_);
  if (cfg_.geo) {
    if (!coords.defined() || coords.rank() != 2 || coords.dim(0) != N || coords.dim(1) != 2) {
      throw ValidationError("geostanet: coordinates must be [" + std::to_string(N) + ", 2]");
    }
    e = tn::add(e, tn::matmul(coords, w_geo_));
  }
  e = tn::reshape(e, {n, t, N, d});

  Tensor hstate;
  if (cfg_.temporal == TemporalMode::kRecurrent) {
    // H_0 is the first frame's enriched embedding; each later frame is added to the state
    // before the next encoder pass, so every day of the window reaches the output.
    hstate = tn::reshape(tn::slice(e, 1, 0, 1), {n, N, d});
    for (std::size_t s = 0; s < t; ++s) {
      if (s > 0) hstate = tn::add(hstate, tn::reshape(tn::slice(e, 1, s, 1), {n, N, d}));
      for (const auto& b : blocks_) hstate = b.apply(hstate);
    }
  } else {
    auto seq = tn::reshape(tn::permute(e, {0, 2, 1, 3}), {n * N, t, d});
    for (const auto& b : blocks_) seq = b.apply(seq);
    hstate = tn::reshape(tn::slice(seq, 1, t - 1, 1), {n, N, d});
  }
  hstate = tn::layer_norm(hstate, lnf_g_, lnf_b_);
  const auto grid = tn::permute(tn::reshape(hstate, {n, ph, pw, d}), {0, 3, 1, 2});
  return tn::reshape(tn::conv2d_transpose(grid, k_up_, b_up_, q), {n, shape_.hf(), shape_.wf()});
}

// ---------------------------------------------------------------------------------------

std::unique_ptr<Downscaler> make_downscaler(const ArchConfig& cfg, const InputShape& shape) {
  switch (cfg.kind) {
    case ArchKind::kCnnLstm: return std::make_unique<CnnLstm>(cfg, shape);
    case ArchKind::kConvLstm: return std::make_unique<ConvLstmNet>(cfg, shape);
    case ArchKind::kVit: return std::make_unique<Vit>(cfg, shape);
    case ArchKind::kGeoStaNet: return std::make_unique<GeoStaNet>(cfg, shape);
  }
  throw ValidationError("unknown architecture");
}

void TrainedModel::save(const std::filesystem::path& dir, const nlohmann::json& extra) const {
  nlohmann::json meta{{"kind", "downscaler"},
                      {"arch", net->config()},
                      {"shape", net->shape()},
                      {"normalizer", norm},
                      {"bounds", bounds}};
  if (!extra.is_null()) meta["extra"] = extra;
  tn::save_checkpoint(dir, net->params(), meta);
}

TrainedModel TrainedModel::load(const std::filesystem::path& dir) {
  const auto meta = tn::read_checkpoint_meta(dir);
  if (meta.value("kind", "") != "downscaler") throw ValidationError(dir.string() + " is not a downscaler checkpoint");
  TrainedModel m;
  try {
    m.net = make_downscaler(meta.at("arch").get<ArchConfig>(), meta.at("shape").get<InputShape>());
    m.norm = meta.at("normalizer").get<Normalizer>();
    m.bounds = meta.at("bounds").get<DomainBounds>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(dir.string() + ": malformed checkpoint metadata (" + e.what() + ")");
  }
  tn::load_checkpoint(dir, m.net->params());
  return m;
}

Tensor TrainedModel::coords_for(const Dataset& d) const {
  if (net->config().kind != ArchKind::kGeoStaNet) return Tensor();
  return patch_coords(d, net->config().patch, bounds);
}

std::vector<std::vector<double>> TrainedModel::predict(const Dataset& d, std::span<const std::size_t> idx,
                                                       std::size_t batch) const {
  if (!(d.shape == net->shape())) throw ValidationError("predict: dataset shape does not match the model");
  tn::NoGradGuard ng;
  const auto coords = coords_for(d);
  std::vector<std::vector<double>> out;
  for (std::size_t start = 0; start < idx.size(); start += batch) {
    const auto part = idx.subspan(start, std::min(batch, idx.size() - start));
    const auto y = net->forward(batch_inputs(d, part, norm), coords, false);
    const std::size_t cells = d.shape.target_size();
    for (std::size_t k = 0; k < part.size(); ++k) {
      std::vector<double> f(cells);
      for (std::size_t c = 0; c < cells; ++c) f[c] = norm.invert(y.data()[k * cells + c]);
      out.push_back(std::move(f));
    }
  }
  return out;
}

}  // namespace climdown::downscale
