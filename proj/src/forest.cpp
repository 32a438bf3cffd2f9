#include "sigkit/forest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>

#include "sigkit/errors.hpp"
#include "sigkit/parallel.hpp"
#include "sigkit/rng.hpp"

namespace sigkit::forest {

namespace {

// Copies row r of a column-major matrix into buf.
void gather_row(const std::vector<std::vector<double>>& columns, std::size_t r,
                std::vector<double>& buf) {
  buf.resize(columns.size());
  for (std::size_t j = 0; j < columns.size(); ++j) buf[j] = columns[j][r];
}

void check_dataset(const std::vector<std::vector<double>>& columns,
                   const std::vector<double>& targets) {
  if (columns.empty()) throw ValidationError("feature matrix has no columns");
  if (targets.empty()) throw ValidationError("feature matrix has no rows");
  for (std::size_t j = 0; j < columns.size(); ++j) {
    if (columns[j].size() != targets.size()) {
      throw ValidationError("feature column " + std::to_string(j) + " has " +
                            std::to_string(columns[j].size()) + " rows; targets have " +
                            std::to_string(targets.size()));
    }
  }
}

// Grows one tree depth-first (left subtree before right), so node layout and
// every random draw depend only on the data and the generator state.
class TreeBuilder {
 public:
  TreeBuilder(const std::vector<std::vector<double>>& columns, const std::vector<double>& targets,
              int max_depth, int min_leaf, int mtry, Rng rng)
      : columns_(columns),
        targets_(targets),
        max_depth_(max_depth),
        min_leaf_(min_leaf),
        mtry_(mtry),
        rng_(rng),
        feature_pool_(columns.size()) {
    std::iota(feature_pool_.begin(), feature_pool_.end(), 0);
  }

  Tree run(std::vector<std::uint32_t>& rows) {
    Tree tree;
    nodes_.clear();
    build(rows, 0);
    tree.nodes = std::move(nodes_);
    return tree;
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double score = -std::numeric_limits<double>::infinity();
  };

  int build(std::vector<std::uint32_t>& rows, int depth) {
    const std::size_t m = rows.size();
    double sum = 0.0;
    for (const std::uint32_t r : rows) sum += targets_[r];

    const int idx = static_cast<int>(nodes_.size());
    TreeNode node;
    node.value = sum / static_cast<double>(m);
    nodes_.push_back(node);

    if (depth >= max_depth_ || m < 2 * static_cast<std::size_t>(min_leaf_)) return idx;
    bool all_equal = true;
    for (const std::uint32_t r : rows) {
      if (targets_[r] != targets_[rows[0]]) {
        all_equal = false;
        break;
      }
    }
    if (all_equal) return idx;

    const Split best = find_split(rows, sum);
    if (best.feature < 0) return idx;  // every sampled feature was constant

    std::vector<std::uint32_t> left;
    std::vector<std::uint32_t> right;
    left.reserve(m);
    right.reserve(m);
    const std::vector<double>& col = columns_[static_cast<std::size_t>(best.feature)];
    for (const std::uint32_t r : rows) {
      (col[r] <= best.threshold ? left : right).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();  // release before recursing; depth can be O(rows/min_leaf)

    nodes_[static_cast<std::size_t>(idx)].feature = best.feature;
    nodes_[static_cast<std::size_t>(idx)].threshold = best.threshold;
    const int li = build(left, depth + 1);
    nodes_[static_cast<std::size_t>(idx)].left = li;
    const int ri = build(right, depth + 1);
    nodes_[static_cast<std::size_t>(idx)].right = ri;
    return idx;
  }

  // Greedy variance-reduction search over mtry features sampled without
  // replacement. Maximizing sumL^2/nL + sumR^2/nR over split points is
  // equivalent to minimizing the summed child SSE; the parent term is
  // constant. Candidates sit between consecutive distinct feature values and
  // the stored threshold is the left value itself, so routing x <= threshold
  // reproduces the training partition exactly (no midpoint rounding).
  Split find_split(const std::vector<std::uint32_t>& rows, double sum_total) {
    const std::size_t m = rows.size();
    const std::size_t n_features = columns_.size();
    for (int j = 0; j < mtry_; ++j) {
      const std::size_t k =
          static_cast<std::size_t>(j) +
          rng_.bounded(static_cast<std::uint64_t>(n_features - static_cast<std::size_t>(j)));
      std::swap(feature_pool_[static_cast<std::size_t>(j)], feature_pool_[k]);
    }

    Split best;
    for (int j = 0; j < mtry_; ++j) {
      const int f = feature_pool_[static_cast<std::size_t>(j)];
      const std::vector<double>& col = columns_[static_cast<std::size_t>(f)];
      scratch_.clear();
      scratch_.reserve(m);
      for (const std::uint32_t r : rows) scratch_.push_back({col[r], targets_[r]});
      // Sorting on (value, target) gives a total order up to interchangeable
      // duplicates, so the prefix sums below are bit-stable no matter how the
      // partition ordered the rows.
      std::sort(scratch_.begin(), scratch_.end());

      double sum_left = 0.0;
      for (std::size_t k = 1; k < m; ++k) {
        sum_left += scratch_[k - 1].second;
        if (scratch_[k - 1].first == scratch_[k].first) continue;
        if (k < static_cast<std::size_t>(min_leaf_) ||
            m - k < static_cast<std::size_t>(min_leaf_)) {
          continue;
        }
        const double sum_right = sum_total - sum_left;
        const double score = sum_left * sum_left / static_cast<double>(k) +
                             sum_right * sum_right / static_cast<double>(m - k);
        if (score > best.score) {
          best.feature = f;
          best.threshold = scratch_[k - 1].first;
          best.score = score;
        }
      }
    }
    return best;
  }

  const std::vector<std::vector<double>>& columns_;
  const std::vector<double>& targets_;
  int max_depth_;
  int min_leaf_;
  int mtry_;
  Rng rng_;
  std::vector<int> feature_pool_;
  std::vector<std::pair<double, double>> scratch_;
  std::vector<TreeNode> nodes_;
};

}  // namespace

int TreeConfig::validate(std::size_t n_features) const {
  if (max_depth < 1) throw ConfigError("max_depth must be >= 1");
  if (min_leaf < 1) throw ConfigError("min_leaf must be >= 1");
  if (n_features == 0) throw ValidationError("feature matrix has no columns");
  int resolved = mtry;
  if (resolved == 0) {
    resolved = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_features))));
  }
  if (resolved < 1 || static_cast<std::size_t>(resolved) > n_features) {
    throw ConfigError("mtry must be between 1 and the feature count (" +
                      std::to_string(n_features) + "), got " + std::to_string(resolved));
  }
  return resolved;
}

double Tree::predict(const std::vector<double>& row) const {
  std::size_t idx = 0;
  while (nodes[idx].feature >= 0) {
    const TreeNode& node = nodes[idx];
    idx = static_cast<std::size_t>(row[static_cast<std::size_t>(node.feature)] <= node.threshold
                                       ? node.left
                                       : node.right);
  }
  return nodes[idx].value;
}

Tree fit_tree(const std::vector<std::vector<double>>& columns, const std::vector<double>& targets,
              const TreeConfig& config) {
  check_dataset(columns, targets);
  const int mtry = config.validate(columns.size());
  if (targets.size() < 2 * static_cast<std::size_t>(config.min_leaf)) {
    throw InsufficientDataError("tree needs at least 2*min_leaf = " +
                                std::to_string(2 * config.min_leaf) + " rows, got " +
                                std::to_string(targets.size()));
  }
  std::vector<std::uint32_t> rows(targets.size());
  std::iota(rows.begin(), rows.end(), 0);
  TreeBuilder builder(columns, targets, config.max_depth, config.min_leaf, mtry, Rng(config.seed));
  return builder.run(rows);
}

double Forest::predict(const std::vector<double>& row) const {
  std::vector<double> values(trees.size());
  for (std::size_t i = 0; i < trees.size(); ++i) values[i] = trees[i].predict(row);
  // Summing in sorted order makes the mean independent of tree order.
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (const double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

Forest fit_forest(const std::vector<std::vector<double>>& columns,
                  const std::vector<double>& targets, int n_trees, const TreeConfig& config,
                  int n_threads) {
  check_dataset(columns, targets);
  const int mtry = config.validate(columns.size());
  if (n_trees < 1) throw ConfigError("n_trees must be >= 1");
  const std::size_t n = targets.size();
  if (n < 2 * static_cast<std::size_t>(config.min_leaf)) {
    throw InsufficientDataError("forest needs at least 2*min_leaf = " +
                                std::to_string(2 * config.min_leaf) + " rows, got " +
                                std::to_string(n));
  }

  Forest out;
  out.config = config;
  out.n_trees = n_trees;
  out.n_features = columns.size();
  out.trees.resize(static_cast<std::size_t>(n_trees));
  std::vector<std::vector<std::uint32_t>> oob_rows(static_cast<std::size_t>(n_trees));

  const Rng root(config.seed);
  parallel_for(static_cast<std::size_t>(n_trees), n_threads, [&](std::size_t i) {
    // One substream per tree: the bootstrap draws and every mtry sample come
    // from it, so the tree is a pure function of (seed, tree index, data).
    Rng rng = root.substream(i);
    std::vector<std::uint32_t> sample(n);
    std::vector<char> in_bag(n, 0);
    for (std::size_t k = 0; k < n; ++k) {
      const std::uint32_t r = static_cast<std::uint32_t>(rng.bounded(n));
      sample[k] = r;
      in_bag[r] = 1;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (!in_bag[r]) oob_rows[i].push_back(static_cast<std::uint32_t>(r));
    }
    TreeBuilder builder(columns, targets, config.max_depth, config.min_leaf, mtry, rng);
    out.trees[i] = builder.run(sample);
  });

  // Out-of-bag error: each row is predicted by the mean of the trees whose
  // bootstrap missed it. Aggregated serially in tree order so the result is
  // identical for every thread count.
  std::vector<double> oob_sum(n, 0.0);
  std::vector<int> oob_count(n, 0);
  std::vector<double> row_buf;
  for (std::size_t i = 0; i < out.trees.size(); ++i) {
    for (const std::uint32_t r : oob_rows[i]) {
      gather_row(columns, r, row_buf);
      oob_sum[r] += out.trees[i].predict(row_buf);
      ++oob_count[r];
    }
  }
  double abs_err = 0.0;
  std::size_t covered = 0;
  for (std::size_t r = 0; r < n; ++r) {
    if (oob_count[r] == 0) continue;
    abs_err += std::abs(oob_sum[r] / oob_count[r] - targets[r]);
    ++covered;
  }
  out.oob_error = covered == 0 ? 0.0 : abs_err / static_cast<double>(covered);
  return out;
}

namespace {

// Shared by update_weights and the online walk.
void apply_weight_update(std::vector<double>& error_ema, std::vector<double>& weights, double beta,
                         double epsilon, double realized,
                         const std::vector<double>& forecasts) {
  double total = 0.0;
  for (std::size_t i = 0; i < error_ema.size(); ++i) {
    error_ema[i] = beta * error_ema[i] + (1.0 - beta) * std::abs(forecasts[i] - realized);
    weights[i] = 1.0 / (error_ema[i] + epsilon);
    total += weights[i];
  }
  for (double& w : weights) w /= total;
}

}  // namespace

Ensemble train_ensemble(const indicators::FeatureMatrix& m, int n_experts, std::size_t window_len,
                        int n_trees, const TreeConfig& config, int n_threads) {
  if (n_experts < 1) throw ConfigError("n_experts must be >= 1");
  check_dataset(m.columns, m.target);
  config.validate(m.cols());
  const std::size_t rows = m.rows();

  // Default window: cover [0, rows) with n_experts windows overlapping 50%,
  // i.e. stride ~= window/2, which gives window = ceil(2*rows/(n_experts+1)).
  std::size_t window = window_len;
  if (window == 0) {
    window = (2 * rows + static_cast<std::size_t>(n_experts)) /
             (static_cast<std::size_t>(n_experts) + 1);
  }
  if (window > rows) {
    throw InsufficientDataError("ensemble window of " + std::to_string(window) +
                                " rows exceeds the " + std::to_string(rows) + " available");
  }
  if (window < 2 * static_cast<std::size_t>(config.min_leaf)) {
    throw InsufficientDataError("ensemble window of " + std::to_string(window) +
                                " rows is too small to fit a tree with min_leaf = " +
                                std::to_string(config.min_leaf));
  }

  Ensemble ensemble;
  ensemble.n_features = m.cols();
  const Rng root(config.seed);
  for (int i = 0; i < n_experts; ++i) {
    std::size_t begin = 0;
    if (n_experts > 1) {
      // Evenly spaced starts from 0 to rows - window inclusive; the last
      // window always ends flush with the training range.
      begin = static_cast<std::size_t>(
          std::llround(static_cast<double>(i) * static_cast<double>(rows - window) /
                       static_cast<double>(n_experts - 1)));
    }
    const std::size_t end = begin + window;

    std::vector<std::vector<double>> slice_cols(m.cols());
    for (std::size_t j = 0; j < m.cols(); ++j) {
      slice_cols[j].assign(m.columns[j].begin() + static_cast<std::ptrdiff_t>(begin),
                           m.columns[j].begin() + static_cast<std::ptrdiff_t>(end));
    }
    std::vector<double> slice_target(m.target.begin() + static_cast<std::ptrdiff_t>(begin),
                                     m.target.begin() + static_cast<std::ptrdiff_t>(end));

    TreeConfig expert_config = config;
    expert_config.seed = root.substream(static_cast<std::uint64_t>(i)).seed();
    Expert expert;
    expert.forest = fit_forest(slice_cols, slice_target, n_trees, expert_config, n_threads);
    expert.row_begin = begin;
    expert.row_end = end;
    ensemble.experts.push_back(std::move(expert));
  }

  ensemble.weights.assign(static_cast<std::size_t>(n_experts),
                          1.0 / static_cast<double>(n_experts));
  ensemble.error_ema.assign(static_cast<std::size_t>(n_experts), 0.0);
  return ensemble;
}

std::vector<double> expert_forecasts(const Ensemble& ensemble, const std::vector<double>& row) {
  if (row.size() != ensemble.n_features) {
    throw ValidationError("feature row has " + std::to_string(row.size()) +
                          " values; ensemble was trained on " +
                          std::to_string(ensemble.n_features));
  }
  std::vector<double> out(ensemble.experts.size());
  for (std::size_t i = 0; i < ensemble.experts.size(); ++i) {
    out[i] = ensemble.experts[i].forest.predict(row);
  }
  return out;
}

double ensemble_predict(const Ensemble& ensemble, const std::vector<double>& row) {
  const std::vector<double> forecasts = expert_forecasts(ensemble, row);
  double sum = 0.0;
  for (std::size_t i = 0; i < forecasts.size(); ++i) sum += ensemble.weights[i] * forecasts[i];
  return sum;
}

Ensemble update_weights(Ensemble ensemble, double realized,
                        const std::vector<double>& per_expert_forecasts) {
  if (per_expert_forecasts.size() != ensemble.experts.size()) {
    throw ValidationError("got " + std::to_string(per_expert_forecasts.size()) +
                          " forecasts for " + std::to_string(ensemble.experts.size()) +
                          " experts");
  }
  apply_weight_update(ensemble.error_ema, ensemble.weights, ensemble.beta, ensemble.epsilon,
                      realized, per_expert_forecasts);
  return ensemble;
}

WalkResult online_walk(Ensemble ensemble, const indicators::FeatureMatrix& m,
                       std::size_t row_begin, std::size_t row_end) {
  if (row_end > m.rows() || row_begin > row_end) {
    throw ValidationError("walk range [" + std::to_string(row_begin) + ", " +
                          std::to_string(row_end) + ") is outside the feature matrix");
  }
  for (const Expert& expert : ensemble.experts) {
    if (expert.row_end > row_begin) {
      throw ValidationError("walk rows must start at or after every expert's training interval");
    }
  }
  const auto close_it = std::find(m.names.begin(), m.names.end(), "close");
  if (close_it == m.names.end()) throw ValidationError("feature matrix has no close column");
  const std::vector<double>& close =
      m.columns[static_cast<std::size_t>(close_it - m.names.begin())];
  const bool price_target = m.target_kind == indicators::TargetKind::NextClose;

  WalkResult result;
  std::vector<double> row_buf;
  for (std::size_t t = row_begin; t < row_end; ++t) {
    gather_row(m.columns, t, row_buf);
    const std::vector<double> forecasts = expert_forecasts(ensemble, row_buf);
    double combined = 0.0;
    for (std::size_t i = 0; i < forecasts.size(); ++i) {
      combined += ensemble.weights[i] * forecasts[i];
    }

    ForecastPair pair;
    pair.timestamp = m.timestamps[t];
    pair.today = close[t];
    // Targets are either next closes (used directly) or next log returns
    // (mapped through today's close); either way the pair reports prices.
    pair.forecast = price_target ? combined : close[t] * std::exp(combined);
    pair.tmw = price_target ? m.target[t] : close[t] * std::exp(m.target[t]);
    result.pairs.push_back(pair);

    // Only after the forecast is emitted does the realized target feed back.
    apply_weight_update(ensemble.error_ema, ensemble.weights, ensemble.beta, ensemble.epsilon,
                        m.target[t], forecasts);
    result.weight_trajectory.push_back(ensemble.weights);
  }
  result.ensemble = std::move(ensemble);
  return result;
}

}  // namespace sigkit::forest
