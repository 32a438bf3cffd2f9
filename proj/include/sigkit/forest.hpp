#pragma once

// Regression trees, bagged random forests, and an online ensemble of
// interval-trained forests whose weights track inverse absolute prediction
// error. Everything here is deterministic: trees draw from per-tree
// substreams of a single seed, so a forest fitted with 1 thread is
// bit-identical to one fitted with 8.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "sigkit/forecast.hpp"
#include "sigkit/indicators.hpp"

namespace sigkit::forest {

// Hyperparameters for a single regression tree. mtry = 0 resolves to
// ceil(sqrt(feature count)) at fit time; max_depth defaults to "unlimited"
// (any depth the data supports).
struct TreeConfig {
  int max_depth = std::numeric_limits<int>::max();
  int min_leaf = 5;
  int mtry = 0;
  std::uint64_t seed = 0;

  // Returns the resolved mtry for a dataset with n_features columns and
  // throws ConfigError if any field is out of range.
  int validate(std::size_t n_features) const;
};

// One node of a fitted tree. Internal nodes route row[feature] <= threshold
// to `left`, else `right`; leaves have feature = -1 and carry the mean
// target of their training rows in `value`.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct Tree {
  std::vector<TreeNode> nodes;

  double predict(const std::vector<double>& row) const;
};

// Features are column-major: columns[j][i] is feature j of row i. All
// columns must have the same length as `targets`.
Tree fit_tree(const std::vector<std::vector<double>>& columns, const std::vector<double>& targets,
              const TreeConfig& config);

struct Forest {
  std::vector<Tree> trees;
  TreeConfig config;
  int n_trees = 0;
  double oob_error = 0.0;  // mean absolute error on out-of-bag rows
  std::size_t n_features = 0;

  // Mean of the tree predictions. Tree outputs are sorted before summing so
  // the result is bit-identical under any permutation of the trees.
  double predict(const std::vector<double>& row) const;
};

// Fits n_trees trees, each on its own bootstrap resample drawn from
// substream(tree index) of config.seed. Trees may be fitted by n_threads
// workers; results do not depend on the schedule.
Forest fit_forest(const std::vector<std::vector<double>>& columns,
                  const std::vector<double>& targets, int n_trees, const TreeConfig& config,
                  int n_threads = 1);

// One forest plus the half-open row interval of the feature matrix it was
// trained on.
struct Expert {
  Forest forest;
  std::size_t row_begin = 0;
  std::size_t row_end = 0;
};

// Fixed-size committee of interval-trained forests. `weights` is always a
// probability vector; `error_ema` is the exponentially smoothed absolute
// prediction error that drives the weights.
struct Ensemble {
  std::vector<Expert> experts;
  std::vector<double> weights;
  std::vector<double> error_ema;
  double beta = 0.9;      // EMA retention for the error estimate
  double epsilon = 1e-8;  // guards the inverse when an error hits zero
  std::size_t n_features = 0;
};

// Trains n_experts forests on contiguous intervals of the feature matrix.
// window_len = 0 picks the tiling window ceil(2*rows/(n_experts+1)), which
// covers the whole range with 50% overlap between neighbours; explicit
// window lengths place the intervals evenly between row 0 and the end.
// Initial weights are uniform. Bootstrap samples never leave an expert's
// own interval.
Ensemble train_ensemble(const indicators::FeatureMatrix& m, int n_experts, std::size_t window_len,
                        int n_trees, const TreeConfig& config, int n_threads = 1);

// Per-expert forecasts for one feature row, in expert order.
std::vector<double> expert_forecasts(const Ensemble& ensemble, const std::vector<double>& row);

// Weighted committee forecast: sum_i weights[i] * forest_i(row).
double ensemble_predict(const Ensemble& ensemble, const std::vector<double>& row);

// Inverse-error reweighting after observing a realized value:
//   error_ema[i] <- beta*error_ema[i] + (1-beta)*|forecast_i - realized|
//   weights      <- (1/(error_ema+epsilon)) normalized to sum 1.
Ensemble update_weights(Ensemble ensemble, double realized,
                        const std::vector<double>& per_expert_forecasts);

struct WalkResult {
  std::vector<ForecastPair> pairs;
  Ensemble ensemble;  // state after the last update
  // weights after each step's update, one row per emitted pair
  std::vector<std::vector<double>> weight_trajectory;
};

// Walks rows [row_begin, row_end) of the feature matrix in order: emit the
// weighted forecast, then observe the realized target and update the
// weights. A step's forecast therefore never sees its own realized value.
// Rows must start at or after every expert's training interval.
WalkResult online_walk(Ensemble ensemble, const indicators::FeatureMatrix& m,
                       std::size_t row_begin, std::size_t row_end);

}  // namespace sigkit::forest
