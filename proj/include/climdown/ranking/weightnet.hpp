#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "climdown/ranking/topsis.hpp"
#include "climdown/tensor/params.hpp"

namespace climdown::ranking {

/// MLP from matrix summary features (5 per criterion) to a softmax weight vector:
/// standardise -> 5n -> 64 (relu) -> 32 (relu) -> n (softmax). The standardisation
/// statistics are fitted on the training features and stored with the parameters.
class WeightNet {
 public:
  WeightNet(std::vector<Criterion> criteria, std::uint64_t seed);

  const std::vector<Criterion>& criteria() const { return criteria_; }
  std::size_t n_features() const { return kFeaturesPerCriterion * criteria_.size(); }
  std::uint64_t seed() const { return seed_; }

  /// features [batch, 5n] -> weights [batch, n]
  tensor::Tensor forward(const tensor::Tensor& features) const;
  WeightVector predict(const std::vector<double>& features) const;
  /// Weights for a matrix whose criteria are a subset of this net's (dropped columns get
  /// constant-column features; their weight is removed and the rest renormalised).
  WeightVector predict(const DecisionMatrix& c) const;

  /// Sets the per-feature standardisation from rows of features.
  void fit_standardizer(const std::vector<double>& rows);

  tensor::ParameterSet& params() { return params_; }
  const tensor::ParameterSet& params() const { return params_; }

  void save(const std::filesystem::path& dir, const nlohmann::json& extra = {}) const;
  static WeightNet load(const std::filesystem::path& dir);

 private:
  std::vector<Criterion> criteria_;
  std::uint64_t seed_;
  tensor::ParameterSet params_;
  std::vector<double>* feat_mean_;
  std::vector<double>* feat_scale_;  // 1 / sd
  tensor::Tensor w1_, b1_, w2_, b2_, w3_, b3_;
};

struct WeightNetConfig {
  double lr = 1e-3;
  std::size_t batch_size = 32;
  std::size_t epochs = 50;
  std::size_t sgd_warmup_epochs = 5;  // plain SGD first, then Adam
  std::uint64_t seed = 0;             // shuffling
};

struct WeightNetLog {
  std::vector<double> epoch_loss;  // mean batch MSE per epoch
};

/// One training example per context: featurize(C) -> entropy_target_weights(C).
WeightNetLog train_weightnet(WeightNet& net, const std::vector<DecisionMatrix>& contexts,
                             const WeightNetConfig& cfg);

/// Mean squared error of the net against the entropy targets over `contexts`.
double weightnet_mse(const WeightNet& net, const std::vector<DecisionMatrix>& contexts);

/// Features and targets after widening a matrix to the net's full criteria list.
std::vector<double> features_for(const std::vector<Criterion>& all, const DecisionMatrix& c);
WeightVector targets_for(const std::vector<Criterion>& all, const DecisionMatrix& c);

/// Random m-model matrix with columns of varied skewness (benefit and cost mixed per
/// `criteria`), for training and tests.
DecisionMatrix synthetic_matrix(std::uint64_t seed, std::size_t m,
                                const std::vector<Criterion>& criteria);

/// `count` synthetic matrices seeded seed, seed+1, ... with 8 to 32 models each.
std::vector<DecisionMatrix> synthetic_contexts(std::uint64_t seed, std::size_t count,
                                               const std::vector<Criterion>& criteria);

}  // namespace climdown::ranking
