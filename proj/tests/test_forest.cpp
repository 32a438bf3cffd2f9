#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "sigkit/errors.hpp"
#include "sigkit/forest.hpp"
#include "sigkit/indicators.hpp"
#include "sigkit/rng.hpp"
#include "support/synthetic.hpp"

using namespace sigkit;
using namespace sigkit::forest;

namespace {

bool same_nodes(const Tree& a, const Tree& b) {
  if (a.nodes.size() != b.nodes.size()) return false;
  for (std::size_t i = 0; i < a.nodes.size(); ++i) {
    const TreeNode& x = a.nodes[i];
    const TreeNode& y = b.nodes[i];
    if (x.feature != y.feature || x.left != y.left || x.right != y.right) return false;
    if (x.threshold != y.threshold || x.value != y.value) return false;
  }
  return true;
}

Forest constant_forest(double value, std::size_t n_features) {
  Forest f;
  Tree t;
  t.nodes.push_back(TreeNode{});  // feature = -1, so the root is a leaf
  t.nodes.back().value = value;
  f.trees.push_back(std::move(t));
  f.n_trees = 1;
  f.n_features = n_features;
  return f;
}

Ensemble leaf_ensemble(const std::vector<double>& leaf_values, std::size_t n_features) {
  Ensemble e;
  for (const double v : leaf_values) {
    Expert ex;
    ex.forest = constant_forest(v, n_features);
    e.experts.push_back(std::move(ex));
  }
  const double w = 1.0 / static_cast<double>(leaf_values.size());
  e.weights.assign(leaf_values.size(), w);
  e.error_ema.assign(leaf_values.size(), 0.0);
  e.n_features = n_features;
  return e;
}

// Minimal feature matrix with a close column; target defaults to next close.
indicators::FeatureMatrix flat_matrix(std::size_t rows, double price, double target) {
  indicators::FeatureMatrix m;
  for (std::size_t i = 0; i < rows; ++i) m.timestamps.push_back(Timestamp{static_cast<std::int64_t>(i)});
  m.names = {"close"};
  m.columns = {std::vector<double>(rows, price)};
  m.target.assign(rows, target);
  return m;
}

indicators::FeatureMatrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  indicators::FeatureMatrix m;
  for (std::size_t i = 0; i < rows; ++i) m.timestamps.push_back(Timestamp{static_cast<std::int64_t>(i)});
  for (std::size_t j = 0; j < cols; ++j) {
    m.names.push_back("f" + std::to_string(j));
    std::vector<double> col(rows);
    for (auto& x : col) x = rng.normal();
    m.columns.push_back(std::move(col));
  }
  m.names.back() = "close";
  m.target.resize(rows);
  for (auto& x : m.target) x = rng.normal();
  return m;
}

indicators::FeatureMatrix head_rows(const indicators::FeatureMatrix& m, std::size_t n) {
  indicators::FeatureMatrix out;
  out.timestamps.assign(m.timestamps.begin(), m.timestamps.begin() + static_cast<std::ptrdiff_t>(n));
  out.names = m.names;
  for (const auto& col : m.columns) {
    out.columns.emplace_back(col.begin(), col.begin() + static_cast<std::ptrdiff_t>(n));
  }
  out.target.assign(m.target.begin(), m.target.begin() + static_cast<std::ptrdiff_t>(n));
  out.target_kind = m.target_kind;
  return out;
}

std::vector<double> row_of(const indicators::FeatureMatrix& m, std::size_t t) {
  std::vector<double> row(m.cols());
  for (std::size_t j = 0; j < m.cols(); ++j) row[j] = m.columns[j][t];
  return row;
}

}  // namespace

TEST_CASE("TreeConfig: validation and mtry resolution") {
  TreeConfig cfg;
  CHECK(cfg.validate(16) == 4);
  CHECK(cfg.validate(17) == 5);  // ceil(sqrt(17))
  CHECK(cfg.validate(38) == 7);
  cfg.mtry = 3;
  CHECK(cfg.validate(3) == 3);
  CHECK_THROWS_AS(cfg.validate(2), ConfigError);
  cfg.mtry = 0;
  cfg.max_depth = 0;
  CHECK_THROWS_AS(cfg.validate(4), ConfigError);
  cfg.max_depth = 1;
  cfg.min_leaf = 0;
  CHECK_THROWS_AS(cfg.validate(4), ConfigError);
}

TEST_CASE("fit_tree: constant target collapses to an exact single leaf") {
  Rng rng(1);
  std::vector<double> feature(64);
  for (auto& x : feature) x = rng.uniform(-1.0, 1.0);
  // 60.25 sums exactly for any count this small, so the leaf mean is exact.
  const std::vector<double> targets(64, 60.25);
  TreeConfig cfg;
  const Tree tree = fit_tree({feature}, targets, cfg);
  CHECK(tree.nodes.size() == 1);
  for (int i = 0; i < 10; ++i) {
    CHECK(tree.predict({rng.uniform(-2.0, 2.0)}) == 60.25);
  }
}

TEST_CASE("fit_tree: separable data is memorized exactly") {
  Rng rng(2);
  std::vector<double> feature(64);
  for (auto& x : feature) x = rng.uniform(-5.0, 5.0);
  const std::vector<double> targets = feature;
  TreeConfig cfg;
  cfg.min_leaf = 1;
  cfg.mtry = 1;
  const Tree tree = fit_tree({feature}, targets, cfg);
  for (std::size_t i = 0; i < feature.size(); ++i) {
    CHECK(tree.predict({feature[i]}) == targets[i]);
  }
}

TEST_CASE("fit_tree: equal seeds give bit-identical trees; errors reported") {
  Rng rng(3);
  std::vector<double> f0(100), f1(100), targets(100);
  for (std::size_t i = 0; i < 100; ++i) {
    f0[i] = rng.normal();
    f1[i] = rng.normal();
    targets[i] = f0[i] - 0.5 * f1[i] + 0.1 * rng.normal();
  }
  TreeConfig cfg;
  cfg.mtry = 1;
  cfg.seed = 42;
  const Tree a = fit_tree({f0, f1}, targets, cfg);
  const Tree b = fit_tree({f0, f1}, targets, cfg);
  CHECK(same_nodes(a, b));
  CHECK(a.nodes.size() > 1);

  cfg.seed = 43;  // a different draw sequence should explore different splits
  const Tree c = fit_tree({f0, f1}, targets, cfg);
  CHECK_FALSE(same_nodes(a, c));

  CHECK_THROWS_AS(fit_tree({}, targets, cfg), ValidationError);
  CHECK_THROWS_AS(fit_tree({f0}, std::vector<double>(99, 0.0), cfg), ValidationError);
  CHECK_THROWS_AS(fit_tree({std::vector<double>(4, 1.0)}, std::vector<double>(4, 1.0), cfg),
                  InsufficientDataError);
}

TEST_CASE("fit_forest: constant target predicts the constant with zero OOB error") {
  Rng rng(4);
  std::vector<double> feature(80);
  for (auto& x : feature) x = rng.normal();
  const std::vector<double> targets(80, 60.25);
  TreeConfig cfg;
  const Forest forest = fit_forest({feature}, targets, 25, cfg);
  CHECK(forest.oob_error == 0.0);
  CHECK(forest.n_trees == 25);
  CHECK(forest.trees.size() == 25);
  for (int i = 0; i < 10; ++i) {
    CHECK(forest.predict({rng.normal()}) == 60.25);
  }
  CHECK_THROWS_AS(fit_forest({feature}, targets, 0, cfg), ConfigError);
}

TEST_CASE("fit_forest: a single tree is its own average") {
  Rng rng(5);
  std::vector<double> feature(60), targets(60);
  for (std::size_t i = 0; i < 60; ++i) {
    feature[i] = rng.normal();
    targets[i] = 2.0 * feature[i] + rng.normal();
  }
  TreeConfig cfg;
  cfg.seed = 9;
  const Forest forest = fit_forest({feature}, targets, 1, cfg);
  REQUIRE(forest.trees.size() == 1);
  for (int i = 0; i < 20; ++i) {
    const std::vector<double> row{rng.uniform(-2.0, 2.0)};
    CHECK(forest.predict(row) == forest.trees[0].predict(row));
  }
}

TEST_CASE("fit_forest: prediction is invariant under tree-order permutation") {
  Rng rng(6);
  std::vector<double> f0(120), f1(120), targets(120);
  for (std::size_t i = 0; i < 120; ++i) {
    f0[i] = rng.normal();
    f1[i] = rng.normal();
    targets[i] = f0[i] * f1[i] + 0.2 * rng.normal();
  }
  TreeConfig cfg;
  cfg.mtry = 1;
  Forest forest = fit_forest({f0, f1}, targets, 16, cfg);
  Forest reversed = forest;
  std::reverse(reversed.trees.begin(), reversed.trees.end());
  for (int i = 0; i < 25; ++i) {
    const std::vector<double> row{rng.normal(), rng.normal()};
    CHECK(forest.predict(row) == reversed.predict(row));
  }
}

TEST_CASE("fit_forest: thread count never changes the result") {
  Rng rng(7);
  std::vector<double> f0(150), f1(150), targets(150);
  for (std::size_t i = 0; i < 150; ++i) {
    f0[i] = rng.normal();
    f1[i] = rng.normal();
    targets[i] = std::sin(f0[i]) + 0.5 * f1[i] + 0.1 * rng.normal();
  }
  TreeConfig cfg;
  cfg.mtry = 1;
  cfg.seed = 11;
  const Forest serial = fit_forest({f0, f1}, targets, 12, cfg, 1);
  const Forest threaded = fit_forest({f0, f1}, targets, 12, cfg, 4);
  CHECK(serial.oob_error == threaded.oob_error);
  REQUIRE(serial.trees.size() == threaded.trees.size());
  for (std::size_t i = 0; i < serial.trees.size(); ++i) {
    CHECK(same_nodes(serial.trees[i], threaded.trees[i]));
  }
}

TEST_CASE("fit_forest: bagging beats a single tree on noisy linear data") {
  int forest_wins = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(100 + seed);
    const std::size_t n_train = 200, n_test = 100;
    std::vector<double> f0(n_train), f1(n_train), y(n_train);
    for (std::size_t i = 0; i < n_train; ++i) {
      f0[i] = rng.uniform(-1.0, 1.0);
      f1[i] = rng.uniform(-1.0, 1.0);
      y[i] = 2.0 * f0[i] - f1[i] + 0.5 * rng.normal();
    }
    TreeConfig tree_cfg;
    tree_cfg.mtry = 2;
    tree_cfg.seed = seed;
    const Tree tree = fit_tree({f0, f1}, y, tree_cfg);
    TreeConfig forest_cfg;
    forest_cfg.mtry = 1;
    forest_cfg.seed = seed;
    const Forest forest = fit_forest({f0, f1}, y, 40, forest_cfg);

    double tree_mae = 0.0, forest_mae = 0.0;
    for (std::size_t i = 0; i < n_test; ++i) {
      const std::vector<double> row{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
      const double truth = 2.0 * row[0] - row[1];
      tree_mae += std::abs(tree.predict(row) - truth);
      forest_mae += std::abs(forest.predict(row) - truth);
    }
    forest_wins += (forest_mae <= tree_mae) ? 1 : 0;
  }
  CHECK(forest_wins >= 40);
}

TEST_CASE("train_ensemble: uniform weights and default 50%-overlap tiling") {
  const auto m = random_matrix(200, 3, 8);
  TreeConfig cfg;
  cfg.mtry = 1;

  const Ensemble solo = train_ensemble(m, 1, 0, 2, cfg);
  REQUIRE(solo.weights.size() == 1);
  CHECK(solo.weights[0] == 1.0);
  CHECK(solo.experts[0].row_begin == 0);
  CHECK(solo.experts[0].row_end == 200);

  const Ensemble trio = train_ensemble(m, 3, 0, 2, cfg);
  REQUIRE(trio.weights.size() == 3);
  for (const double w : trio.weights) CHECK(w == 1.0 / 3.0);
  double sum = 0.0;
  for (const double w : trio.weights) sum += w;
  CHECK(std::abs(sum - 1.0) <= 1e-12);

  // rows=200, n_experts=4: window ceil(400/5)=80, starts every 40 rows.
  const Ensemble quad = train_ensemble(m, 4, 0, 2, cfg);
  REQUIRE(quad.experts.size() == 4);
  std::vector<char> covered(200, 0);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(quad.experts[i].row_begin == 40 * i);
    CHECK(quad.experts[i].row_end == 40 * i + 80);
    for (std::size_t r = quad.experts[i].row_begin; r < quad.experts[i].row_end; ++r) {
      covered[r] = 1;
    }
  }
  CHECK(std::count(covered.begin(), covered.end(), 1) == 200);
  for (std::size_t i = 0; i + 1 < 4; ++i) {  // neighbours share half a window
    CHECK(quad.experts[i].row_end - quad.experts[i + 1].row_begin == 40);
  }
}

TEST_CASE("train_ensemble: explicit windows tile evenly and edge cases throw") {
  const auto m = random_matrix(200, 3, 9);
  TreeConfig cfg;
  cfg.mtry = 1;
  const Ensemble e = train_ensemble(m, 4, 50, 2, cfg);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(e.experts[i].row_begin == 50 * i);
    CHECK(e.experts[i].row_end == 50 * (i + 1));
  }

  CHECK_THROWS_AS(train_ensemble(m, 0, 0, 2, cfg), ConfigError);
  CHECK_THROWS_AS(train_ensemble(m, 2, 300, 2, cfg), InsufficientDataError);
  CHECK_THROWS_AS(train_ensemble(m, 2, 8, 2, cfg), InsufficientDataError);  // < 2*min_leaf
}

TEST_CASE("ensemble_predict: dot product, convexity, dimension check") {
  Ensemble e = leaf_ensemble({1.5, -0.25, 4.0}, 2);
  e.weights = {0.2, 0.3, 0.5};
  const std::vector<double> row{0.0, 0.0};

  const auto fs = expert_forecasts(e, row);
  REQUIRE(fs.size() == 3);
  CHECK(fs[0] == 1.5);
  CHECK(fs[1] == -0.25);
  CHECK(fs[2] == 4.0);

  const double got = ensemble_predict(e, row);
  const double want = 0.2 * 1.5 + 0.3 * -0.25 + 0.5 * 4.0;
  CHECK(std::abs(got - want) <= 1e-12);
  CHECK(got >= -0.25 - 1e-9);
  CHECK(got <= 4.0 + 1e-9);

  e.weights = {1.0, 0.0, 0.0};
  CHECK(ensemble_predict(e, row) == 1.5);

  CHECK_THROWS_AS(ensemble_predict(e, {0.0}), ValidationError);
  CHECK_THROWS_AS(expert_forecasts(e, {0.0, 0.0, 0.0}), ValidationError);
}

TEST_CASE("update_weights: inverse-error rule hand cases") {
  // Fresh EMAs with per-step errors 0.1 and 0.2: the inverse-error rule gives
  // weights 2/3 and 1/3 up to the epsilon guard.
  Ensemble e = leaf_ensemble({0.0, 0.0}, 1);
  Ensemble after = update_weights(e, 0.0, {0.1, 0.2});
  CHECK(after.weights[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-6));
  CHECK(after.weights[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-6));

  Ensemble sharp = leaf_ensemble({0.0, 0.0}, 1);
  sharp.epsilon = 0.0;  // remove the guard; both EMAs are strictly positive
  sharp = update_weights(sharp, 0.0, {0.1, 0.2});
  CHECK(std::abs(sharp.weights[0] - 2.0 / 3.0) <= 1e-9);
  CHECK(std::abs(sharp.weights[1] - 1.0 / 3.0) <= 1e-9);
  CHECK(std::abs(sharp.weights[0] + sharp.weights[1] - 1.0) <= 1e-12);

  Ensemble tied = leaf_ensemble({0.0, 0.0, 0.0}, 1);
  tied = update_weights(tied, 0.7, {0.3, 0.3, 0.3});
  CHECK(tied.weights[0] == tied.weights[1]);
  CHECK(tied.weights[1] == tied.weights[2]);

  Ensemble oracle = leaf_ensemble({0.0, 0.0}, 1);
  oracle = update_weights(oracle, 5.0, {5.0, 5.01});  // expert 0 is error-free
  CHECK(oracle.error_ema[0] == 0.0);
  CHECK(oracle.weights[0] > 0.999);

  CHECK_THROWS_AS(update_weights(e, 0.0, {0.1}), ValidationError);
}

TEST_CASE("update_weights: weights stay a probability vector under random fire") {
  Ensemble e = leaf_ensemble({0.0, 0.0, 0.0, 0.0}, 1);
  Rng rng(10);
  for (int step = 0; step < 1000; ++step) {
    const double realized = rng.normal();
    std::vector<double> fs(4);
    for (auto& f : fs) f = rng.normal();
    e = update_weights(e, realized, fs);
    double sum = 0.0;
    double min_w = 1.0;
    for (const double w : e.weights) {
      sum += w;
      min_w = std::min(min_w, w);
    }
    CHECK(min_w >= 0.0);
    CHECK(std::abs(sum - 1.0) <= 1e-12);
  }
}

TEST_CASE("online_walk: a single expert keeps weight one") {
  const auto m = flat_matrix(50, 100.0, 100.0);
  const auto result = online_walk(leaf_ensemble({101.0}, 1), m, 0, 40);
  REQUIRE(result.pairs.size() == 40);
  REQUIRE(result.weight_trajectory.size() == 40);
  for (std::size_t k = 0; k < 40; ++k) {
    CHECK(result.pairs[k].forecast == 101.0);
    CHECK(result.pairs[k].today == 100.0);
    CHECK(result.pairs[k].tmw == 100.0);
    CHECK(result.weight_trajectory[k] == std::vector<double>{1.0});
  }
}

TEST_CASE("online_walk: the exact expert takes over monotonically") {
  const auto m = flat_matrix(80, 100.0, 100.0);
  const auto result = online_walk(leaf_ensemble({100.0, 100.5}, 1), m, 0, 60);
  REQUIRE(result.pairs.size() == 60);
  CHECK(result.pairs[0].forecast == 100.25);  // uniform weights on the first step
  double prev = 0.0;
  for (const auto& weights : result.weight_trajectory) {
    REQUIRE(weights.size() == 2);
    CHECK(weights[0] >= prev);
    CHECK(std::abs(weights[0] + weights[1] - 1.0) <= 1e-12);
    prev = weights[0];
  }
  CHECK(result.weight_trajectory.front()[0] > 0.99);  // error 0 vs 0.5 separates fast
  CHECK(result.pairs.back().forecast == doctest::Approx(100.0).epsilon(1e-6));
  CHECK(result.ensemble.weights == result.weight_trajectory.back());

  CHECK_THROWS_AS(online_walk(leaf_ensemble({100.0}, 1), m, 0, 81), ValidationError);
  Ensemble trained_late = leaf_ensemble({100.0}, 1);
  trained_late.experts[0].row_end = 5;
  CHECK_THROWS_AS(online_walk(trained_late, m, 0, 10), ValidationError);
}

TEST_CASE("online_walk: real features, determinism, causal truncation") {
  const auto bars = testsupport::random_walk_bars(400, 50);
  const auto m_full = indicators::build_feature_matrix(bars, indicators::IndicatorConfig{});
  REQUIRE(m_full.rows() == 368);
  const auto m_train = head_rows(m_full, 250);

  TreeConfig cfg;
  cfg.seed = 7;
  const Ensemble serial = train_ensemble(m_train, 3, 0, 15, cfg, 1);
  const Ensemble threaded = train_ensemble(m_train, 3, 0, 15, cfg, 4);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(serial.experts[i].forest.oob_error == threaded.experts[i].forest.oob_error);
    const auto probe = row_of(m_full, 260 + 3 * i);
    CHECK(serial.experts[i].forest.predict(probe) == threaded.experts[i].forest.predict(probe));
    CHECK(serial.experts[i].row_end <= 250);
  }

  const auto row = row_of(m_full, 255);
  const auto fs = expert_forecasts(serial, row);
  double lo = fs[0], hi = fs[0], dot = 0.0;
  for (std::size_t i = 0; i < fs.size(); ++i) {
    lo = std::min(lo, fs[i]);
    hi = std::max(hi, fs[i]);
    dot += serial.weights[i] * fs[i];
  }
  const double combined = ensemble_predict(serial, row);
  CHECK(std::abs(combined - dot) <= 1e-12);
  CHECK(combined >= lo - 1e-9);
  CHECK(combined <= hi + 1e-9);

  const auto full_walk = online_walk(serial, m_full, 250, 300);
  REQUIRE(full_walk.pairs.size() == 50);
  const std::size_t close_idx = static_cast<std::size_t>(
      std::find(m_full.names.begin(), m_full.names.end(), "close") - m_full.names.begin());
  for (std::size_t k = 0; k < 50; ++k) {
    const std::size_t t = 250 + k;
    CHECK(full_walk.pairs[k].timestamp == m_full.timestamps[t]);
    CHECK(full_walk.pairs[k].today == m_full.columns[close_idx][t]);
    CHECK(full_walk.pairs[k].tmw == m_full.target[t]);
  }

  // Bars the walk has not reached yet must not influence earlier steps.
  const auto head_walk = online_walk(serial, head_rows(m_full, 280), 250, 280);
  REQUIRE(head_walk.pairs.size() == 30);
  for (std::size_t k = 0; k < 30; ++k) {
    CHECK(head_walk.pairs[k].forecast == full_walk.pairs[k].forecast);
    CHECK(head_walk.weight_trajectory[k] == full_walk.weight_trajectory[k]);
  }

  const auto rerun = online_walk(serial, m_full, 250, 300);
  for (std::size_t k = 0; k < 50; ++k) {
    CHECK(rerun.pairs[k].forecast == full_walk.pairs[k].forecast);
  }
}
