#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "stancelab/gbt.hpp"

using namespace stancelab;

namespace {

FeatureMatrix dense_matrix(const std::vector<std::vector<double>>& x, const std::vector<std::string>& names) {
  std::vector<UserId> rows;
  std::vector<std::vector<Cell>> cells(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    rows.push_back("r" + std::to_string(i));
    for (std::size_t j = 0; j < x[i].size(); ++j)
      if (x[i][j] != 0.0) cells[i].push_back(Cell{static_cast<std::uint32_t>(j), x[i][j]});
  }
  std::vector<FeatureColumn> cols;
  for (const std::string& n : names) cols.push_back({n, Block::tweet_term, FeatureType::word});
  return FeatureMatrix(rows, cols, cells);
}

std::vector<std::string> names(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t j = 0; j < n; ++j) out.push_back("f" + std::to_string(100 + j));
  return out;
}

struct Data {
  std::vector<std::vector<double>> x;
  std::vector<int> y;
};

// Columns 0 and 1 carry the label through a count shift; the rest are noise.
Data planted(std::size_t n, std::size_t p, std::uint64_t seed, bool signal = true) {
  std::mt19937_64 g(seed);
  std::poisson_distribution<int> noise(1.0), lo(0.5), hi(3.0);
  Data d;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = static_cast<int>(g() & 1);
    std::vector<double> row(p);
    for (std::size_t j = 0; j < p; ++j)
      row[j] = (signal && j < 2) ? (y ? hi(g) : lo(g)) : noise(g);
    d.x.push_back(row);
    d.y.push_back(y);
  }
  return d;
}

BoostParams quick() {
  BoostParams p;
  p.n_estimators = 40;
  p.max_depth = 3;
  p.validation_fraction = 0.0;
  return p;
}

}  // namespace

TEST(Gbt, EmptyModelIsNeutral) {
  BoostedModel m;
  m.columns.push_back({"a", Block::tweet_term, FeatureType::word});
  m.total_gain.push_back(0.0);
  const FeatureMatrix x = dense_matrix({{1.0}, {0.0}}, {"a"});
  for (double c : predict_confidence(m, x)) EXPECT_DOUBLE_EQ(c, 0.5);
}

TEST(Gbt, BaseScoreIsLogOddsOfPrevalence) {
  const FeatureMatrix x = dense_matrix({{1}, {1}, {1}, {1}}, {"a"});
  const std::vector<int> y{1, 0, 0, 0};
  const BoostedModel m = train(x, y, quick());
  EXPECT_NEAR(m.base_score, std::log(1.0 / 3.0), 1e-12);
  // A constant column offers no split; every tree is a single leaf.
  for (const Tree& t : m.trees) EXPECT_EQ(t.nodes.size(), 1u);
}

TEST(Gbt, SeparableDataIsLearned) {
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  for (int i = 0; i < 40; ++i) {
    x.push_back({static_cast<double>(i % 2 ? 5 : 0), static_cast<double>(i % 3)});
    y.push_back(i % 2);
  }
  const FeatureMatrix m = dense_matrix(x, {"a", "b"});
  const BoostedModel model = train(m, y, quick());
  const auto c = predict_confidence(model, m);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_EQ(c[i] >= 0.5, y[i] == 1);
  EXPECT_EQ(model.trees[0].nodes[0].column, 0);
  EXPECT_GT(model.trees[0].nodes[0].threshold, 0.0);
  EXPECT_LE(model.trees[0].nodes[0].threshold, 5.0);
}

TEST(Gbt, LeafStepIsCapped) {
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  for (int i = 0; i < 200; ++i) {
    x.push_back({static_cast<double>(i % 2)});
    y.push_back(i % 2);
  }
  const FeatureMatrix m = dense_matrix(x, {"a"});
  BoostParams p = quick();
  p.learning_rate = 1.0;
  p.max_delta_step = 0.3;
  p.n_estimators = 1;
  const BoostedModel capped = train(m, y, p);
  for (const TreeNode& n : capped.trees[0].nodes)
    if (n.leaf()) {
      EXPECT_LE(std::fabs(n.value), 0.3 + 1e-15);
    }
  p.max_delta_step = 0.0;
  const BoostedModel free = train(m, y, p);
  double biggest = 0.0;
  for (const TreeNode& n : free.trees[0].nodes)
    if (n.leaf()) biggest = std::max(biggest, std::fabs(n.value));
  // G = 50 and H = 25 on each side, lambda 1.
  EXPECT_NEAR(biggest, 50.0 / 26.0, 1e-9);
}

TEST(Gbt, GainAccounting) {
  const Data d = planted(300, 6, 3);
  const BoostedModel m = train(dense_matrix(d.x, names(6)), d.y, quick());
  std::vector<double> sum(6, 0.0);
  for (const Tree& t : m.trees)
    for (const TreeNode& n : t.nodes)
      if (!n.leaf()) {
        EXPECT_GT(n.value, 0.0);
        sum[static_cast<std::size_t>(n.column)] += n.value;
      }
  for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(m.total_gain[j], sum[j], 1e-9 * (1.0 + sum[j]));
}

TEST(Gbt, PreorderLayout) {
  const Data d = planted(300, 6, 4);
  const BoostedModel m = train(dense_matrix(d.x, names(6)), d.y, quick());
  for (const Tree& t : m.trees)
    for (std::size_t k = 0; k < t.nodes.size(); ++k)
      if (!t.nodes[k].leaf()) {
        EXPECT_EQ(t.nodes[k].left, static_cast<std::int32_t>(k + 1));
        EXPECT_GT(t.nodes[k].right, t.nodes[k].left);
      }
}

TEST(Gbt, DeterministicAndColumnOrderInvariant) {
  const Data d = planted(300, 8, 5);
  BoostParams p = quick();
  p.validation_fraction = 0.2;
  p.rng_seed = 11;
  const FeatureMatrix m = dense_matrix(d.x, names(8));
  const BoostedModel a = train(m, d.y, p);
  EXPECT_EQ(a, train(m, d.y, p));

  std::vector<std::size_t> perm{7, 3, 0, 5, 1, 6, 2, 4};
  std::vector<std::vector<double>> xp;
  std::vector<std::string> np;
  for (std::size_t j : perm) np.push_back(names(8)[j]);
  for (const auto& row : d.x) {
    std::vector<double> r;
    for (std::size_t j : perm) r.push_back(row[j]);
    xp.push_back(r);
  }
  const FeatureMatrix mp = dense_matrix(xp, np);
  const BoostedModel b = train(mp, d.y, p);
  EXPECT_EQ(predict_margin(a, m), predict_margin(b, mp));
  EXPECT_EQ(predict_margin(a, m), predict_margin(b, m));
}

TEST(Gbt, EarlyStoppingKeepsBestRound) {
  const Data d = planted(400, 20, 6, false);
  BoostParams p;
  p.n_estimators = 200;
  p.early_stopping_rounds = 5;
  const BoostedModel m = train(dense_matrix(d.x, names(20)), d.y, p);
  ASSERT_TRUE(m.best_validation_loss.has_value());
  EXPECT_EQ(m.best_iteration + 1, static_cast<int>(m.trees.size()));
  EXPECT_LT(m.stopped_at, 200);
  EXPECT_EQ(m.stopped_at - m.best_iteration - 1, 5);
}

TEST(Gbt, ModelRoundTrip) {
  const Data d = planted(200, 5, 7);
  const BoostedModel m = train(dense_matrix(d.x, names(5)), d.y, quick());
  const BoostedModel back = parse_model(serialize_model(m));
  EXPECT_EQ(back, m);
  EXPECT_THROW(parse_model("not a model"), Error);
}

TEST(Gbt, AcceptByThreshold) {
  const std::vector<double> c{0.9, 0.7, 0.5, 0.3, 0.1, 0.69};
  const auto a = accept_by_threshold(c, 0.7);
  EXPECT_EQ(a[0], std::optional<bool>(true));
  EXPECT_EQ(a[1], std::optional<bool>(true));
  EXPECT_EQ(a[2], std::nullopt);
  EXPECT_EQ(a[3], std::optional<bool>(false));
  EXPECT_EQ(a[4], std::optional<bool>(false));
  EXPECT_EQ(a[5], std::nullopt);
}

TEST(Gbt, AcceptArgmax) {
  const auto a = accept_argmax({{0.2, 0.8}, {0.5, 0.5}, {0.1, 0.3, 0.6}}, 0.6);
  EXPECT_EQ(a[0], std::optional<int>(1));
  EXPECT_EQ(a[1], std::nullopt);
  EXPECT_EQ(a[2], std::optional<int>(2));
}

TEST(Gbt, CrossValidationSeparableAndNull) {
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  for (int i = 0; i < 200; ++i) {
    x.push_back({static_cast<double>(i % 2 ? 2 + i % 5 : 0), static_cast<double>(i % 7)});
    y.push_back(i % 2);
  }
  const CVReport sep = cross_validate(dense_matrix(x, {"a", "b"}), y, quick(), 5);
  EXPECT_GE(sep.precision_mean, 0.95);
  EXPECT_GE(sep.recall_mean, 0.95);
  EXPECT_EQ(sep.out_of_fold.size(), y.size());

  const Data d = planted(400, 10, 8, false);
  const CVReport null = cross_validate(dense_matrix(d.x, names(10)), d.y, quick(), 5);
  EXPECT_GE(null.precision_mean, 0.35);
  EXPECT_LE(null.precision_mean, 0.65);
}

TEST(Gbt, StratifiedFolds) {
  std::vector<int> y(103, 0);
  for (int i = 0; i < 31; ++i) y[static_cast<std::size_t>(i)] = 1;
  const auto f = stratified_folds(y, 5, 2);
  for (int k = 0; k < 5; ++k) {
    int pos = 0, all = 0;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (f[i] == k) {
        ++all;
        pos += y[i];
      }
    EXPECT_GE(pos, 6);
    EXPECT_LE(pos, 7);
    EXPECT_GE(all, 20);
    EXPECT_LE(all, 22);
  }
  EXPECT_EQ(f, stratified_folds(y, 5, 2));
}

TEST(Gbt, PlantedFeaturesRankFirst) {
  int found = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Data d = planted(600, 50, 9 + seed);
    const auto imp = feature_importance(train(dense_matrix(d.x, names(50)), d.y, quick()));
    std::vector<std::string> top;
    for (std::size_t k = 0; k < 5; ++k) top.push_back(imp[k].first.identifier);
    found += std::count(top.begin(), top.end(), "f100") == 1 && std::count(top.begin(), top.end(), "f101") == 1;
  }
  EXPECT_GT(found, 10);
}

TEST(Gbt, OneVsRest) {
  std::vector<std::vector<double>> x;
  std::vector<int> cls;
  for (int i = 0; i < 90; ++i) {
    const int c = i % 3;
    x.push_back({c == 0 ? 3.0 : 0.0, c == 1 ? 3.0 : 0.0, c == 2 ? 3.0 : 0.0});
    cls.push_back(c);
  }
  const FeatureMatrix m = dense_matrix(x, {"a", "b", "c"});
  const OneVsRestModel model = train_one_vs_rest(m, cls, 3, quick());
  const auto p = predict_one_vs_rest(model, m);
  const auto a = accept_argmax(p, 0.6);
  for (std::size_t i = 0; i < cls.size(); ++i) {
    EXPECT_NEAR(std::accumulate(p[i].begin(), p[i].end(), 0.0), 1.0, 1e-12);
    EXPECT_EQ(a[i], std::optional<int>(cls[i]));
  }
}

TEST(Gbt, SeparableValidationLossAndConfidence) {
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  for (int i = 0; i < 100; ++i) {
    x.push_back({i % 2 ? 1.0 : 0.0});
    y.push_back(i % 2);
  }
  const FeatureMatrix m = dense_matrix(x, {"a"});
  const BoostedModel model = train(m, y, BoostParams{});
  ASSERT_TRUE(model.best_validation_loss.has_value());
  EXPECT_LT(*model.best_validation_loss, 0.1);
  const auto c = predict_confidence(model, m);
  int pos = 0, confident = 0;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (y[i] == 1) {
      ++pos;
      confident += c[i] > 0.9;
    }
  EXPECT_GE(confident, 0.95 * pos);
}

TEST(Gbt, NullSignalAccuracyNearChance) {
  int inside = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Data fit = planted(300, 10, 1000 + seed, false);
    const Data held = planted(300, 10, 2000 + seed, false);
    BoostParams p;
    p.rng_seed = seed;
    const BoostedModel model = train(dense_matrix(fit.x, names(10)), fit.y, p);
    const auto c = predict_confidence(model, dense_matrix(held.x, names(10)));
    int hit = 0;
    for (std::size_t i = 0; i < held.y.size(); ++i) hit += (c[i] >= 0.5) == (held.y[i] == 1);
    const double acc = static_cast<double>(hit) / static_cast<double>(held.y.size());
    inside += acc >= 0.4 && acc <= 0.6;
  }
  EXPECT_GE(inside, 19);
}

TEST(Gbt, SingleTreeAndSingleSplit) {
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  for (int i = 0; i < 20; ++i) {
    x.push_back({i % 2 ? 1.0 : 0.0, static_cast<double>(i % 3)});
    y.push_back(i % 2);
  }
  BoostParams p = quick();
  p.n_estimators = 1;
  p.max_depth = 1;
  const BoostedModel model = train(dense_matrix(x, {"a", "b"}), y, p);
  EXPECT_EQ(model.trees.size(), 1u);
  EXPECT_EQ(model.trees[0].nodes.size(), 3u);
  const auto nonzero = std::count_if(model.total_gain.begin(), model.total_gain.end(), [](double g) { return g > 0; });
  EXPECT_EQ(nonzero, 1);
  EXPECT_GT(model.total_gain[0], 0.0);
  EXPECT_EQ(model.total_gain[1], 0.0);
}

TEST(Gbt, IdenticalRowsIdenticalConfidence) {
  const Data d = planted(200, 5, 4);
  const BoostedModel model = train(dense_matrix(d.x, names(5)), d.y, quick());
  const auto c = predict_confidence(model, dense_matrix({d.x[7], d.x[7]}, names(5)));
  EXPECT_EQ(c[0], c[1]);
}
