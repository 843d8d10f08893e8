#include "climdown/ranking/weightnet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "climdown/error.hpp"
#include "climdown/rng.hpp"
#include "climdown/tensor/checkpoint.hpp"
#include "climdown/tensor/optim.hpp"

namespace climdown::ranking {

using tensor::Tensor;

WeightNet::WeightNet(std::vector<Criterion> criteria, std::uint64_t seed)
    : criteria_(std::move(criteria)), seed_(seed) {
  if (criteria_.empty()) throw ValidationError("weight net needs at least one criterion");
  const std::size_t nf = n_features(), n = criteria_.size();
  Rng rng(seed, 0x77);
  w1_ = params_.add("fc1.w", tensor::he_uniform({nf, 64}, nf, rng));
  b1_ = params_.add("fc1.b", Tensor::zeros({64}));
  w2_ = params_.add("fc2.w", tensor::he_uniform({64, 32}, 64, rng));
  b2_ = params_.add("fc2.b", Tensor::zeros({32}));
  w3_ = params_.add("fc3.w", tensor::glorot_uniform({32, n}, 32, n, rng));
  b3_ = params_.add("fc3.b", Tensor::zeros({n}));
  feat_mean_ = &params_.add_buffer("input.mean", std::vector<double>(nf, 0.0));
  feat_scale_ = &params_.add_buffer("input.scale", std::vector<double>(nf, 1.0));
}

void WeightNet::fit_standardizer(const std::vector<double>& rows) {
  const std::size_t nf = n_features();
  const std::size_t count = rows.size() / nf;
  if (count == 0 || rows.size() % nf != 0) throw ValidationError("weight net: bad feature rows");
  for (std::size_t k = 0; k < nf; ++k) {
    double mu = 0.0;
    for (std::size_t r = 0; r < count; ++r) mu += rows[r * nf + k];
    mu /= static_cast<double>(count);
    double var = 0.0;
    for (std::size_t r = 0; r < count; ++r) var += (rows[r * nf + k] - mu) * (rows[r * nf + k] - mu);
    const double sd = std::sqrt(var / static_cast<double>(count));
    (*feat_mean_)[k] = mu;
    (*feat_scale_)[k] = sd > 1e-12 ? 1.0 / sd : 1.0;
  }
}

Tensor WeightNet::forward(const Tensor& x) const {
  if (x.rank() != 2 || x.dim(1) != n_features()) {
    throw ValidationError("weight net: expected features [batch, " + std::to_string(n_features()) +
                          "], got " + tensor::shape_str(x.shape()));
  }
  std::vector<double> shift(n_features());
  for (std::size_t k = 0; k < shift.size(); ++k) shift[k] = -(*feat_mean_)[k] * (*feat_scale_)[k];
  const auto z = tensor::add(tensor::mul(x, Tensor::from({n_features()}, *feat_scale_)),
                             Tensor::from({n_features()}, std::move(shift)));
  auto h = tensor::relu(tensor::dense(z, w1_, b1_));
  h = tensor::relu(tensor::dense(h, w2_, b2_));
  return tensor::softmax(tensor::dense(h, w3_, b3_), -1);
}

WeightVector WeightNet::predict(const std::vector<double>& features) const {
  tensor::NoGradGuard ng;
  const auto y = forward(Tensor::from({1, features.size()}, features));
  return WeightVector(y.data().begin(), y.data().end());
}

std::vector<double> features_for(const std::vector<Criterion>& all, const DecisionMatrix& c) {
  const auto f = featurize(c);
  std::vector<double> out;
  out.reserve(all.size() * kFeaturesPerCriterion);
  for (const auto& crit : all) {
    const auto it = std::find(c.criteria.begin(), c.criteria.end(), crit);
    if (it == c.criteria.end()) {
      // Same summary a constant all-zero column would produce.
      out.insert(out.end(), {0.0, 0.0, 0.0, 0.0, 1.0});
    } else {
      const auto j = static_cast<std::size_t>(it - c.criteria.begin());
      out.insert(out.end(), f.begin() + static_cast<std::ptrdiff_t>(j * kFeaturesPerCriterion),
                 f.begin() + static_cast<std::ptrdiff_t>((j + 1) * kFeaturesPerCriterion));
    }
  }
  return out;
}

WeightVector targets_for(const std::vector<Criterion>& all, const DecisionMatrix& c) {
  const auto w = entropy_target_weights(normalize(c), c);
  WeightVector out(all.size(), 0.0);
  for (std::size_t k = 0; k < all.size(); ++k) {
    const auto it = std::find(c.criteria.begin(), c.criteria.end(), all[k]);
    if (it != c.criteria.end()) out[k] = w[static_cast<std::size_t>(it - c.criteria.begin())];
  }
  return out;
}

WeightVector WeightNet::predict(const DecisionMatrix& c) const {
  for (const auto& crit : c.criteria) {
    if (std::find(criteria_.begin(), criteria_.end(), crit) == criteria_.end()) {
      throw ValidationError("weight net was not trained on criterion '" +
                            std::string(metrics::metric_name(crit.metric)) + "'");
    }
  }
  const auto full = predict(features_for(criteria_, c));
  WeightVector w;
  double s = 0.0;
  for (const auto& crit : c.criteria) {
    const auto k = static_cast<std::size_t>(std::find(criteria_.begin(), criteria_.end(), crit) -
                                            criteria_.begin());
    w.push_back(full[k]);
    s += full[k];
  }
  for (double& v : w) v /= s;
  return w;
}

void WeightNet::save(const std::filesystem::path& dir, const nlohmann::json& extra) const {
  nlohmann::json crit = nlohmann::json::array();
  for (const auto& c : criteria_) crit.push_back(std::string(metrics::metric_name(c.metric)));
  nlohmann::json meta{{"kind", "weightnet"}, {"criteria", crit}, {"seed", seed_}};
  if (!extra.is_null()) meta["extra"] = extra;
  tensor::save_checkpoint(dir, params_, meta);
}

WeightNet WeightNet::load(const std::filesystem::path& dir) {
  const auto meta = tensor::read_checkpoint_meta(dir);
  if (meta.value("kind", "") != "weightnet") {
    throw ValidationError(dir.string() + " is not a weight-net checkpoint");
  }
  WeightNet net(parse_criteria(meta.at("criteria").get<std::vector<std::string>>()),
                meta.at("seed").get<std::uint64_t>());
  tensor::load_checkpoint(dir, net.params_);
  return net;
}

namespace {

struct Dataset {
  std::vector<double> x;  // rows of features
  std::vector<double> y;  // rows of targets
  std::size_t rows = 0;
};

Dataset build(const WeightNet& net, const std::vector<DecisionMatrix>& contexts) {
  Dataset d;
  for (const auto& c : contexts) {
    const auto f = features_for(net.criteria(), c);
    const auto t = targets_for(net.criteria(), c);
    d.x.insert(d.x.end(), f.begin(), f.end());
    d.y.insert(d.y.end(), t.begin(), t.end());
    ++d.rows;
  }
  return d;
}

}  // namespace

WeightNetLog train_weightnet(WeightNet& net, const std::vector<DecisionMatrix>& contexts,
                             const WeightNetConfig& cfg) {
  if (contexts.empty()) throw ValidationError("weight net training needs at least one context");
  if (cfg.batch_size == 0 || cfg.epochs == 0) throw ValidationError("weight net: empty schedule");
  const auto data = build(net, contexts);
  net.fit_standardizer(data.x);
  const std::size_t nf = net.n_features(), n = net.criteria().size();
  tensor::Optimizer sgd(tensor::OptimizerKind::kSgd, cfg.lr, net.params().tensors());
  tensor::Optimizer adam(tensor::OptimizerKind::kAdam, cfg.lr, net.params().tensors());
  Rng rng(cfg.seed, 0x5eed);
  std::vector<std::size_t> idx(data.rows);
  std::iota(idx.begin(), idx.end(), std::size_t{0});

  WeightNetLog log;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    auto& opt = epoch < cfg.sgd_warmup_epochs ? sgd : adam;
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < idx.size(); start += cfg.batch_size) {
      const std::size_t bs = std::min(cfg.batch_size, idx.size() - start);
      std::vector<double> xb, yb;
      for (std::size_t r = start; r < start + bs; ++r) {
        const auto k = idx[r];
        xb.insert(xb.end(), data.x.begin() + static_cast<std::ptrdiff_t>(k * nf),
                  data.x.begin() + static_cast<std::ptrdiff_t>((k + 1) * nf));
        yb.insert(yb.end(), data.y.begin() + static_cast<std::ptrdiff_t>(k * n),
                  data.y.begin() + static_cast<std::ptrdiff_t>((k + 1) * n));
      }
      opt.zero_grad();
      auto loss = tensor::mse(net.forward(Tensor::from({bs, nf}, std::move(xb))),
                              Tensor::from({bs, n}, std::move(yb)));
      loss.backward();
      opt.step();
      total += loss.item();
      ++batches;
    }
    const double mean = total / static_cast<double>(batches);
    if (!std::isfinite(mean)) {
      throw NumericFault("weight net training diverged at epoch " + std::to_string(epoch + 1));
    }
    log.epoch_loss.push_back(mean);
  }
  return log;
}

double weightnet_mse(const WeightNet& net, const std::vector<DecisionMatrix>& contexts) {
  const auto data = build(net, contexts);
  tensor::NoGradGuard ng;
  const auto pred =
      net.forward(Tensor::from({data.rows, net.n_features()}, data.x));
  return tensor::mse(pred, Tensor::from(pred.shape(), data.y)).item();
}

DecisionMatrix synthetic_matrix(std::uint64_t seed, std::size_t m,
                                const std::vector<Criterion>& criteria) {
  Rng rng(seed, 0xdec);
  DecisionMatrix c;
  c.criteria = criteria;
  c.context = {"synthetic", std::to_string(seed)};
  for (std::size_t i = 0; i < m; ++i) c.models.push_back("model_" + std::to_string(i));
  const std::size_t n = criteria.size();
  c.values.resize(m * n);
  for (std::size_t j = 0; j < n; ++j) {
    // u^gamma: gamma < 1 piles values near the top, gamma > 1 near the bottom.
    const double gamma = std::exp(rng.uniform(std::log(0.15), std::log(6.0)));
    const double base = rng.uniform(0.1, 2.0);
    const double spread = rng.uniform(0.05, 1.5);
    for (std::size_t i = 0; i < m; ++i) {
      c.values[i * n + j] = base + spread * std::pow(rng.uniform(), gamma);
    }
  }
  return c;
}

std::vector<DecisionMatrix> synthetic_contexts(std::uint64_t seed, std::size_t count,
                                               const std::vector<Criterion>& criteria) {
  std::vector<DecisionMatrix> out;
  out.reserve(count);
  for (std::size_t s = 0; s < count; ++s) out.push_back(synthetic_matrix(seed + s, 8 + s % 25, criteria));
  return out;
}

}  // namespace climdown::ranking
