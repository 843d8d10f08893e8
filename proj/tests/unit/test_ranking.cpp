#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "climdown/error.hpp"
#include "climdown/ranking/rank.hpp"
#include "climdown/rng.hpp"
#include "support.hpp"

using namespace climdown;
using namespace climdown::ranking;
using metrics::MetricId;

namespace {

DecisionMatrix matrix(std::vector<std::string> models, std::vector<Criterion> crit,
                      std::vector<double> v) {
  DecisionMatrix c;
  c.models = std::move(models);
  c.criteria = std::move(crit);
  c.values = std::move(v);
  c.context = {"Overall", "ANNUAL"};
  return c;
}

const Criterion kBen{MetricId::kKge, Orientation::kBenefit};
const Criterion kBen2{MetricId::kNse, Orientation::kBenefit};
const Criterion kCost{MetricId::kRmse, Orientation::kCost};

metrics::MetricReport report_with(std::initializer_list<std::pair<MetricId, double>> vals) {
  metrics::MetricReport r;
  r.n = 10;
  for (auto [id, v] : vals) {
    r.values[static_cast<std::size_t>(id)] = v;
    r.valid[static_cast<std::size_t>(id)] = true;
  }
  return r;
}

DecisionMatrix random_matrix(Rng& rng, std::size_t m, std::size_t n) {
  std::vector<std::string> models;
  for (std::size_t i = 0; i < m; ++i) models.push_back("m" + std::to_string(i));
  std::vector<Criterion> crit;
  const auto all = default_criteria();
  for (std::size_t j = 0; j < n; ++j) crit.push_back(all[j % all.size()]);
  std::vector<double> v(m * n);
  for (double& x : v) x = rng.uniform(0.0, 5.0);
  return matrix(models, crit, v);
}

}  // namespace

TEST_CASE("criterion orientation") {
  for (auto id : {MetricId::kKge, MetricId::kNse, MetricId::kR, MetricId::kR2, MetricId::kPdfOverlap})
    CHECK(criterion(id).orientation == Orientation::kBenefit);
  for (auto id : {MetricId::kBias, MetricId::kRmse, MetricId::kTxxErr, MetricId::kTnnErr, MetricId::kSdDiff})
    CHECK(criterion(id).orientation == Orientation::kCost);
  CHECK(default_criteria().size() == 9);
  CHECK_THROWS_AS(parse_criteria({"rmse", "rmse"}), ValidationError);
  CHECK_THROWS_AS(parse_criteria({"bogus"}), ValidationError);
}

TEST_CASE("assemble_matrix") {
  const Context ctx{"Arid", "JJA"};
  const std::vector<Criterion> crit{criterion(MetricId::kBias), criterion(MetricId::kKge)};
  SUBCASE("verbatim with absolute bias") {
    const auto a = assemble_matrix({{"a", report_with({{MetricId::kBias, -1.5}, {MetricId::kKge, 0.7}})},
                                    {"b", report_with({{MetricId::kBias, 0.5}, {MetricId::kKge, 0.2}})}},
                                   crit, ctx);
    CHECK(a.matrix.values == std::vector<double>{1.5, 0.7, 0.5, 0.2});
    CHECK(a.imputed.empty());
  }
  SUBCASE("worst-value imputation") {
    const auto a = assemble_matrix({{"a", report_with({{MetricId::kBias, 1.0}, {MetricId::kKge, 0.8}})},
                                    {"b", report_with({{MetricId::kBias, 3.0}})},
                                    {"c", report_with({{MetricId::kKge, 0.6}})}},
                                   crit, ctx);
    CHECK(a.matrix.at(1, 1) == 0.6);  // benefit: min
    CHECK(a.matrix.at(2, 0) == 3.0);  // cost: max
    CHECK(a.imputed.size() == 2);
  }
  SUBCASE("column with no valid entry is dropped") {
    const auto a = assemble_matrix({{"a", report_with({{MetricId::kBias, 1.0}})},
                                    {"b", report_with({{MetricId::kBias, 2.0}})}},
                                   crit, ctx);
    CHECK(a.matrix.n() == 1);
    REQUIRE(a.dropped.size() == 1);
    CHECK(a.dropped[0].metric == MetricId::kKge);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(assemble_matrix({{"a", report_with({{MetricId::kBias, 1.0}})}}, crit, ctx),
                    ValidationError);
    CHECK_THROWS_AS(assemble_matrix({{"a", report_with({})}, {"a", report_with({})}}, crit, ctx),
                    ValidationError);
  }
}

TEST_CASE("normalize") {
  const auto n = normalize(matrix({"a", "b"}, {kBen}, {3, 4}));
  CHECK(n[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(n[1] == doctest::Approx(0.8).epsilon(1e-15));

  const auto z = normalize(matrix({"a", "b"}, {kBen, kCost}, {0, 1, 0, 2}));
  CHECK(z[0] == 0.0);
  CHECK(z[2] == 0.0);
}

TEST_CASE("criterion scaling leaves normalisation and scores bit-unchanged") {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 2 + rng.below(10), n = 1 + rng.below(6);
    auto c = random_matrix(rng, m, n);
    // Integer-valued columns so that small integer factors scale them exactly.
    for (double& v : c.values) v = std::floor(v * 1000.0);
    const auto w = entropy_target_weights(normalize(c), c);
    const auto base_n = normalize(c);
    const auto base = topsis(c, uniform_weights(n));
    for (double k : {2.0, 0.25, 1024.0, 3.0, 7.0, 1000.0}) {
      auto s = c;
      const std::size_t j = rng.below(n);
      for (std::size_t i = 0; i < m; ++i) s.values[i * n + j] *= k;
      CHECK(normalize(s) == base_n);
      const auto r = topsis(s, uniform_weights(n));
      CHECK(r.order == base.order);
      for (std::size_t i = 0; i < m; ++i) CHECK(r.scores[i].cc == base.scores[i].cc);
      CHECK(entropy_target_weights(normalize(s), s) == w);
    }
  }
}

TEST_CASE("arbitrary positive rescaling keeps the ordering") {
  Rng rng(22);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 2 + rng.below(10), n = 1 + rng.below(6);
    const auto c = random_matrix(rng, m, n);
    const auto base = topsis(c, uniform_weights(n));
    auto s = c;
    for (std::size_t j = 0; j < n; ++j) {
      const double k = std::exp(rng.uniform(-10.0, 10.0));
      for (std::size_t i = 0; i < m; ++i) s.values[i * n + j] *= k;
    }
    const auto r = topsis(s, uniform_weights(n));
    CHECK(r.order == base.order);
    for (std::size_t i = 0; i < m; ++i) CHECK(std::fabs(r.scores[i].cc - base.scores[i].cc) < 1e-13);
  }
}

TEST_CASE("topsis hand cases") {
  SUBCASE("three-by-two benefit oracle") {
    const auto r = topsis(matrix({"A", "B", "C"}, {kBen, kBen2}, {1, 1, 0.5, 0.5, 0, 0}),
                          uniform_weights(2));
    CHECK(r.scores[0].cc == 1.0);
    CHECK(r.scores[1].cc == 0.5);
    CHECK(r.scores[2].cc == 0.0);
    CHECK(r.order == std::vector<std::size_t>{0, 1, 2});
    CHECK(r.scores[2].rank == 3);
  }
  SUBCASE("dominance endpoints") {
    const auto r = topsis(matrix({"x", "y"}, {kBen, kCost}, {0.9, 1.0, 0.1, 3.0}), {0.3, 0.7});
    CHECK(r.scores[0].cc == 1.0);
    CHECK(r.scores[1].cc == 0.0);
    CHECK(r.best().model == "x");
  }
  SUBCASE("identical rows") {
    const auto r = topsis(matrix({"b", "a"}, {kBen, kCost}, {0.5, 2.0, 0.5, 2.0}), uniform_weights(2));
    CHECK(r.scores[0].cc == 0.5);
    CHECK(r.scores[1].cc == 0.5);
    CHECK(r.best().model == "a");  // name breaks the tie
  }
  SUBCASE("stored distances reproduce CC") {
    Rng rng(23);
    const auto c = random_matrix(rng, 7, 5);
    const auto r = topsis(c, uniform_weights(5));
    for (const auto& s : r.scores) CHECK(s.cc == s.d_minus / (s.d_plus + s.d_minus));
  }
  SUBCASE("bad weights") {
    const auto c = matrix({"a", "b"}, {kBen}, {1, 2});
    CHECK_THROWS_AS(topsis(c, {0.5}), ValidationError);
    CHECK_THROWS_AS(topsis(c, {1.0, 0.0}), ValidationError);
    CHECK_THROWS_AS(topsis(matrix({"a", "b"}, {kBen, kCost}, {1, 2, 3, 4}), {1.5, -0.5}),
                    ValidationError);
  }
}

TEST_CASE("topsis properties on random matrices") {
  Rng rng(24);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t m = 2 + rng.below(12), n = 1 + rng.below(9);
    const auto c = random_matrix(rng, m, n);
    std::vector<double> w(n);
    double s = 0.0;
    for (double& x : w) s += (x = rng.uniform(0.01, 1.0));
    for (double& x : w) x /= s;
    const auto r = topsis(c, w);
    for (const auto& sc : r.scores) {
      CHECK(sc.cc >= 0.0);
      CHECK(sc.cc <= 1.0);
    }
    for (std::size_t k = 1; k < m; ++k) {
      CHECK(r.scores[r.order[k - 1]].cc >= r.scores[r.order[k]].cc);
    }

    // Row permutation permutes the scores.
    std::vector<std::size_t> perm(m);
    for (std::size_t i = 0; i < m; ++i) perm[i] = i;
    for (std::size_t i = m; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    auto p = c;
    for (std::size_t i = 0; i < m; ++i) {
      p.models[i] = c.models[perm[i]];
      for (std::size_t j = 0; j < n; ++j) p.values[i * n + j] = c.at(perm[i], j);
    }
    const auto rp = topsis(p, w);
    for (std::size_t i = 0; i < m; ++i) {
      CHECK(rp.scores[i].cc == r.scores[perm[i]].cc);
      CHECK(rp.scores[i].rank == r.scores[perm[i]].rank);
    }
  }
}

TEST_CASE("single benefit criterion orders by the raw value") {
  Rng rng(25);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = 2 + rng.below(15);
    std::vector<std::string> names;
    std::vector<double> v(m);
    for (std::size_t i = 0; i < m; ++i) {
      names.push_back("m" + std::to_string(100 + i));
      v[i] = rng.uniform(-3.0, 3.0);
    }
    const auto r = topsis(matrix(names, {kBen}, v), {1.0});
    std::vector<std::size_t> want(m);
    for (std::size_t i = 0; i < m; ++i) want[i] = i;
    std::sort(want.begin(), want.end(), [&](auto a, auto b) { return v[a] > v[b]; });
    CHECK(r.order == want);
  }
}

TEST_CASE("entropy target weights") {
  SUBCASE("constant column gets nothing") {
    const auto c = matrix({"a", "b", "c"}, {kBen, kBen2}, {1, 5, 2, 5, 4, 5});
    const auto w = entropy_target_weights(normalize(c), c);
    CHECK(w[0] == 1.0);
    CHECK(w[1] == 0.0);
  }
  SUBCASE("identical columns share equally") {
    const auto c = matrix({"a", "b", "c"}, {kBen, kBen2}, {1, 1, 2, 2, 4, 4});
    const auto w = entropy_target_weights(normalize(c), c);
    CHECK(w[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(w[1] == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("two models") {
    const auto c = matrix({"a", "b"}, {kBen, kCost}, {1, 3, 2, 3.5});
    const auto w = entropy_target_weights(normalize(c), c);
    CHECK(w[0] + w[1] == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("hand value") {
    // Min-max gives p = (0, 1/3, 2/3), e = -(1/3 ln 1/3 + 2/3 ln 2/3) / ln 3.
    const auto c = matrix({"a", "b", "c"}, {kBen, kBen2}, {0, 0, 1, 1, 2, 4});
    const auto e = column_entropy(normalize(c), c);
    const double want = -(std::log(1.0 / 3) / 3 + 2.0 / 3 * std::log(2.0 / 3)) / std::log(3.0);
    CHECK(e[0] == doctest::Approx(want).epsilon(1e-14));
  }
  SUBCASE("always a valid weight vector") {
    Rng rng(26);
    for (int trial = 0; trial < 200; ++trial) {
      const auto c = random_matrix(rng, 2 + rng.below(20), 1 + rng.below(9));
      CHECK_NOTHROW(validate_weights(entropy_target_weights(normalize(c), c), c.n()));
    }
  }
}

TEST_CASE("featurize") {
  const auto c = matrix({"a", "b"}, {kBen, kBen2}, {0, 3, 1, 3});
  const auto f = featurize(c);
  REQUIRE(f.size() == 10);
  CHECK(f[2] == 0.0);  // min of [0, 1]
  CHECK(f[3] == 1.0);  // max
  CHECK(f[5 + 1] == 0.0);  // constant column sd
  CHECK(f[5 + 4] == 1.0);  // constant column entropy
}

TEST_CASE("weight net outputs are weight vectors") {
  const auto crit = default_criteria();
  WeightNet net(crit, 3);
  Rng rng(27);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> f(net.n_features());
    for (double& x : f) x = rng.normal(0.0, trial < 50 ? 1.0 : 1e3);
    const auto w = net.predict(f);
    double s = 0.0;
    for (double v : w) {
      CHECK(v >= 0.0);
      s += v;
    }
    CHECK(std::fabs(s - 1.0) <= 1e-9);
  }
}

TEST_CASE("weight net training") {
  const auto crit = default_criteria();
  const auto ctx = synthetic_contexts(1000, 50, crit);

  // Default schedule across several initialisations: the loss always drops severalfold
  // and the typical run ends below a tenth of its first-epoch value.
  std::vector<double> ratios;
  for (std::uint64_t seed = 2; seed <= 5; ++seed) {
    WeightNet other(crit, seed);
    WeightNetConfig cfg;
    cfg.seed = seed;
    const auto log = train_weightnet(other, ctx, cfg);
    ratios.push_back(log.epoch_loss.back() / log.epoch_loss.front());
    CHECK(ratios.back() < 0.2);
  }

  WeightNet net(crit, 1);
  const auto log = train_weightnet(net, ctx, WeightNetConfig{});
  REQUIRE(log.epoch_loss.size() == 50);
  ratios.push_back(log.epoch_loss.back() / log.epoch_loss.front());
  std::sort(ratios.begin(), ratios.end());
  CHECK(ratios[2] < 0.1);

  SUBCASE("same seed, same parameters") {
    WeightNet again(crit, 1);
    train_weightnet(again, ctx, WeightNetConfig{});
    CHECK(again.params().flat_values() == net.params().flat_values());
  }
  SUBCASE("checkpoint reload predicts identically") {
    testing::TempDir tmp;
    net.save(tmp.path() / "wn");
    const auto back = WeightNet::load(tmp.path() / "wn");
    CHECK(back.params().flat_values() == net.params().flat_values());
    CHECK(back.predict(ctx[3]) == net.predict(ctx[3]));
  }
}

TEST_CASE("weight net overfits one context") {
  const auto crit = default_criteria();
  const auto c = synthetic_matrix(77, 12, crit);
  WeightNet net(crit, 5);
  WeightNetConfig cfg;
  cfg.epochs = 600;
  train_weightnet(net, {c}, cfg);
  const auto w = net.predict(c);
  const auto t = entropy_target_weights(normalize(c), c);
  double linf = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) linf = std::max(linf, std::fabs(w[j] - t[j]));
  CHECK(linf <= 0.05);
}

TEST_CASE("rank_all") {
  const std::vector<Criterion> crit{criterion(MetricId::kRmse), criterion(MetricId::kKge)};
  std::vector<ContextReports> ctxs;
  for (const char* zone : {"Arid", "Polar"})
    for (const char* season : {"DJF", "ANNUAL"})
      ctxs.push_back({{zone, season},
                      {{"good", report_with({{MetricId::kRmse, 0.5}, {MetricId::kKge, 0.9}})},
                       {"bad", report_with({{MetricId::kRmse, 2.0}, {MetricId::kKge, 0.1}})},
                       {"mid", report_with({{MetricId::kRmse, 1.0}, {MetricId::kKge, 0.5}})}}});
  for (auto src : {WeightSource::kUniform, WeightSource::kEntropy, WeightSource::kWeightNet}) {
    RankConfig cfg;
    cfg.criteria = crit;
    cfg.source = src;
    const auto out = rank_all(ctxs, cfg);
    REQUIRE(out.contexts.size() == 4);
    for (const auto& cr : out.contexts) {
      CHECK(cr.result.best().model == "good");
      CHECK(cr.result.scores[cr.result.order.back()].model == "bad");
      CHECK_NOTHROW(validate_weights(cr.weights, 2));
    }
    std::stringstream heat, rank, top;
    write_heatmap_csv(heat, out);
    write_ranking_csv(rank, out);
    write_top_csv(top, out);
    std::string line;
    std::size_t lines = 0;
    while (std::getline(heat, line)) ++lines;
    CHECK(lines == 4);  // header + 3 models
    lines = 0;
    while (std::getline(rank, line)) ++lines;
    CHECK(lines == 1 + 3 * 4);
    const auto j = weights_json(out);
    CHECK(j["contexts"].size() == 4);
    CHECK(j["source"] == std::string(to_string(src)));
  }
}
