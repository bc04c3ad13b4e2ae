#pragma once

// Random survival forest imputation of missing camera views.
//
// Each survival tree is grown on observed values only: a node's split is
// the (dim, threshold) minimizing label cross-entropy over the samples that
// observe that dimension. Samples missing the split dimension are routed by
// a throwaway uniform draw between the node's observed bounds. Once every
// tree is grown, a missing scalar is replaced by the mean of the observed
// values of its dimension over all terminal nodes the sample reached.
//
// Nearest-neighbor and mean imputation are provided as baselines, together
// with the range-normalized error metric used to compare them.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "camsel/core_model.hpp"
#include "camsel/parallel.hpp"
#include "camsel/rng.hpp"
#include "camsel/split.hpp"
#include "json.hpp"

namespace camsel {

enum class DrawBounds {
  node_local,  // observed min/max of the split dimension among samples at the node
  global,      // observed min/max over the whole training set
};

enum class TerminalAggregation {
  pooled,         // mean over the multiset union of terminal-node values
  per_tree_mean,  // mean of the per-tree terminal-node means
};

struct SurvivalConfig {
  std::size_t n_trees = 20;
  std::size_t max_depth = 20;
  std::size_t min_leaf = 5;
  /// 0 selects ceil(sqrt(dims)).
  std::size_t mtry = 0;
  /// Passes after the first re-grow the forest with the previous pass's
  /// imputations as soft observations; the last pass's values are returned.
  std::size_t n_iterations = 5;
  /// Keep splitting label-pure nodes. All candidates then tie on entropy
  /// and the most balanced one is taken.
  bool split_pure_nodes = true;
  DrawBounds bounds = DrawBounds::node_local;
  TerminalAggregation aggregation = TerminalAggregation::pooled;
  /// Dimensions imputed by majority vote instead of the mean.
  std::vector<std::size_t> categorical_dims;
  std::uint64_t seed = 0;

  std::size_t resolved_mtry(std::size_t dims) const {
    return mtry == 0 ? detail::default_mtry(dims) : std::min(mtry, dims);
  }

  void validate() const {
    if (n_trees == 0) throw Error("survival config: n_trees must be >= 1");
    if (min_leaf == 0) throw Error("survival config: min_leaf must be >= 1");
    if (n_iterations == 0) throw Error("survival config: n_iterations must be >= 1");
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["n_trees"] = n_trees;
    j["max_depth"] = max_depth;
    j["min_leaf"] = min_leaf;
    j["mtry"] = mtry;
    j["n_iterations"] = n_iterations;
    j["split_pure_nodes"] = split_pure_nodes;
    j["draw_bounds"] = bounds == DrawBounds::node_local ? "node" : "global";
    j["aggregation"] = aggregation == TerminalAggregation::pooled ? "pooled" : "per_tree_mean";
    j["categorical_dims"] = categorical_dims;
    j["seed"] = seed;
    return j;
  }

  static SurvivalConfig from_json(const nlohmann::json& j) {
    SurvivalConfig c;
    c.n_trees = j.value("n_trees", c.n_trees);
    c.max_depth = j.value("max_depth", c.max_depth);
    c.min_leaf = j.value("min_leaf", c.min_leaf);
    c.mtry = j.value("mtry", c.mtry);
    c.n_iterations = j.value("n_iterations", c.n_iterations);
    c.split_pure_nodes = j.value("split_pure_nodes", c.split_pure_nodes);
    const auto bounds = j.value("draw_bounds", std::string("node"));
    if (bounds == "node") {
      c.bounds = DrawBounds::node_local;
    } else if (bounds == "global") {
      c.bounds = DrawBounds::global;
    } else {
      throw Error("survival config: draw_bounds must be 'node' or 'global'");
    }
    const auto agg = j.value("aggregation", std::string("pooled"));
    if (agg == "pooled") {
      c.aggregation = TerminalAggregation::pooled;
    } else if (agg == "per_tree_mean") {
      c.aggregation = TerminalAggregation::per_tree_mean;
    } else {
      throw Error("survival config: aggregation must be 'pooled' or 'per_tree_mean'");
    }
    c.categorical_dims = j.value("categorical_dims", c.categorical_dims);
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
  }
};

struct SurvivalNode {
  std::int32_t split_dim = -1;
  double threshold = 0.0;
  std::uint32_t left = 0;
  std::uint32_t right = 0;
  std::uint32_t leaf = 0;
  /// Bounds for routing a sample that misses split_dim.
  DimRange draw_range;

  bool is_leaf() const { return split_dim < 0; }
};

struct SurvivalTree {
  std::vector<SurvivalNode> nodes;
  /// Training ids resident in each terminal node, ascending.
  std::vector<std::vector<std::uint32_t>> leaf_members;
  /// Terminal node of every training sample.
  std::vector<std::uint32_t> terminal;

  /// Routes x; missing split values are drawn from the node's bounds and
  /// discarded right after the comparison.
  std::uint32_t route(std::span<const double> x, std::span<const std::uint8_t> observed,
                      Rng& rng) const {
    std::uint32_t n = 0;
    while (!nodes[n].is_leaf()) {
      const auto& node = nodes[n];
      const auto d = static_cast<std::size_t>(node.split_dim);
      const double v = observed[d] ? x[d]
                                   : uniform_real(rng, node.draw_range.min,
                                                  node.draw_range.max);
      n = v <= node.threshold ? node.left : node.right;
    }
    return nodes[n].leaf;
  }
};

struct DrawDiagnostics {
  /// Observed range of the dimension over the training set.
  DimRange global;
  /// Union of the (a, b) intervals random draws were taken from.
  DimRange used;
  std::uint64_t draws = 0;
};

class SurvivalForest {
 public:
  SurvivalForest() = default;
  SurvivalForest(SurvivalConfig config, std::size_t dims,
                 std::vector<SurvivalTree> trees,
                 std::vector<DrawDiagnostics> diagnostics)
      : config_(std::move(config)), dims_(dims), trees_(std::move(trees)),
        diagnostics_(std::move(diagnostics)) {}

  const SurvivalConfig& config() const { return config_; }
  std::size_t dims() const { return dims_; }
  const std::vector<SurvivalTree>& trees() const { return trees_; }
  const std::vector<DrawDiagnostics>& diagnostics() const { return diagnostics_; }

 private:
  SurvivalConfig config_;
  std::size_t dims_ = 0;
  std::vector<SurvivalTree> trees_;
  std::vector<DrawDiagnostics> diagnostics_;
};

namespace detail {

inline std::vector<DimRange> observed_ranges(const FeatureTable& t) {
  std::vector<DimRange> r(t.cols);
  for (std::size_t i = 0; i < t.rows; ++i) {
    for (std::size_t d = 0; d < t.cols; ++d) {
      if (t.is_observed(i, d)) r[d].include(t.at(i, d));
    }
  }
  return r;
}

}  // namespace detail

/// (a, b) for routing samples that miss `dim`: the observed min and max of
/// `dim` among `samples`, or `fallback` when none of them observes it.
inline DimRange node_draw_bounds(const FeatureTable& data, std::span<const std::uint32_t> samples,
                                 std::size_t dim, const DimRange& fallback) {
  DimRange r;
  for (auto s : samples) {
    if (data.is_observed(s, dim)) r.include(data.at(s, dim));
  }
  return r.empty() ? fallback : r;
}

namespace detail {

class SurvivalGrower {
 public:
  SurvivalGrower(const FeatureTable& data, const SurvivalConfig& config,
                 const std::vector<DimRange>& global, const double* soft, Rng& rng,
                 const XLogX& xlogx)
      : data_(data), config_(config), global_(global), soft_(soft), rng_(rng),
        xlogx_(xlogx), mtry_(config.resolved_mtry(data.cols)),
        diagnostics_(data.cols) {}

  SurvivalTree grow() {
    tree_.terminal.assign(data_.rows, 0);
    std::vector<std::uint32_t> all(data_.rows);
    for (std::size_t i = 0; i < data_.rows; ++i) all[i] = static_cast<std::uint32_t>(i);
    tree_.nodes.push_back({});
    build(0, std::move(all), 0);
    return std::move(tree_);
  }

  const std::vector<DrawDiagnostics>& diagnostics() const { return diagnostics_; }

 private:
  void make_leaf(std::uint32_t node, std::vector<std::uint32_t> samples) {
    const auto leaf = static_cast<std::uint32_t>(tree_.leaf_members.size());
    for (auto s : samples) tree_.terminal[s] = leaf;
    std::sort(samples.begin(), samples.end());
    tree_.nodes[node].split_dim = -1;
    tree_.nodes[node].leaf = leaf;
    tree_.leaf_members.push_back(std::move(samples));
  }

  bool pure(const std::vector<std::uint32_t>& samples) const {
    for (auto s : samples) {
      if (data_.labels[s] != data_.labels[samples.front()]) return false;
    }
    return true;
  }

  void build(std::uint32_t node, std::vector<std::uint32_t> samples, std::size_t depth) {
    if (depth >= config_.max_depth || samples.size() < 2 * config_.min_leaf ||
        (!config_.split_pure_nodes && pure(samples))) {
      make_leaf(node, std::move(samples));
      return;
    }

    // Split optimization sees observed values only; refinement passes also
    // count the previous pass's imputations as (soft) observations.
    Split best;
    for (std::size_t dim : sample_dims(data_.cols, mtry_, rng_, dim_scratch_)) {
      entries_.clear();
      for (auto s : samples) {
        if (data_.is_observed(s, dim)) {
          entries_.push_back({data_.at(s, dim), data_.labels[s], s});
        } else if (soft_ != nullptr) {
          entries_.push_back({soft_[s * data_.cols + dim], data_.labels[s], s});
        }
      }
      std::sort(entries_.begin(), entries_.end(), value_order);
      scan_sorted(entries_, data_.classes, config_.min_leaf, dim, xlogx_, best,
                  left_counts_, right_counts_);
    }
    if (!best.valid()) {
      make_leaf(node, std::move(samples));
      return;
    }

    const DimRange bounds = config_.bounds == DrawBounds::node_local
                                ? node_draw_bounds(data_, samples, best.dim, global_[best.dim])
                                : global_[best.dim];

    std::vector<std::uint32_t> left, right;
    auto& diag = diagnostics_[best.dim];
    for (auto s : samples) {
      double v;
      if (data_.is_observed(s, best.dim)) {
        v = data_.at(s, best.dim);
      } else if (soft_ != nullptr) {
        v = soft_[s * data_.cols + best.dim];
      } else {
        v = uniform_real(rng_, bounds.min, bounds.max);
        diag.used.include(bounds.min);
        diag.used.include(bounds.max);
        ++diag.draws;
      }
      // v is not kept past this comparison.
      (v <= best.threshold ? left : right).push_back(s);
    }
    samples = {};

    const auto l = static_cast<std::uint32_t>(tree_.nodes.size());
    tree_.nodes.push_back({});
    const auto r = static_cast<std::uint32_t>(tree_.nodes.size());
    tree_.nodes.push_back({});
    auto& nd = tree_.nodes[node];
    nd.split_dim = static_cast<std::int32_t>(best.dim);
    nd.threshold = best.threshold;
    nd.left = l;
    nd.right = r;
    nd.draw_range = bounds;
    build(l, std::move(left), depth + 1);
    build(r, std::move(right), depth + 1);
  }

  const FeatureTable& data_;
  const SurvivalConfig& config_;
  const std::vector<DimRange>& global_;
  const double* soft_;
  Rng& rng_;
  const XLogX& xlogx_;
  std::size_t mtry_;
  SurvivalTree tree_;
  std::vector<DrawDiagnostics> diagnostics_;
  std::vector<ValueLabel> entries_;
  std::vector<std::size_t> dim_scratch_;
  std::vector<std::uint32_t> left_counts_, right_counts_;
};

}  // namespace detail

/// Grows a survival forest over every row of `data` (observed and
/// missing-bearing). Tree t uses the stream seeded with `stream_seed + t`.
/// When `soft` is given (rows x cols), its values stand in for the missing
/// entries during split search and routing, and no draws are made.
inline SurvivalForest grow_survival_forest(const FeatureTable& data,
                                           const SurvivalConfig& config,
                                           std::uint64_t stream_seed,
                                           const std::vector<double>* soft = nullptr,
                                           unsigned threads = 0) {
  config.validate();
  if (data.rows == 0) throw Error("survival forest: empty training set");
  const auto global = detail::observed_ranges(data);
  for (std::size_t d = 0; d < data.cols; ++d) {
    if (global[d].empty()) {
      throw Error("survival forest: dimension " + std::to_string(d) +
                  " has no observed value");
    }
  }
  const detail::XLogX xlogx(data.rows);
  std::vector<SurvivalTree> trees(config.n_trees);
  std::vector<std::vector<DrawDiagnostics>> per_tree(config.n_trees);
  parallel_for(config.n_trees, threads, [&](std::size_t t) {
    Rng rng(stream_seed + t);
    detail::SurvivalGrower grower(data, config, global,
                                  soft ? soft->data() : nullptr, rng, xlogx);
    trees[t] = grower.grow();
    per_tree[t] = grower.diagnostics();
  });

  std::vector<DrawDiagnostics> diagnostics(data.cols);
  for (std::size_t d = 0; d < data.cols; ++d) {
    diagnostics[d].global = global[d];
    for (const auto& pt : per_tree) {
      if (!pt[d].used.empty()) {
        diagnostics[d].used.include(pt[d].used.min);
        diagnostics[d].used.include(pt[d].used.max);
      }
      diagnostics[d].draws += pt[d].draws;
    }
  }
  return SurvivalForest(config, data.cols, std::move(trees), std::move(diagnostics));
}

struct ImputationResult {
  std::string method;
  /// The incomplete input with every block filled, in input order.
  Dataset imputed;
  /// rows x dims; 1 where the scalar was imputed, 0 where it was observed.
  std::vector<std::uint8_t> imputed_mask;
  std::vector<DrawDiagnostics> draw_bounds;

  bool is_imputed(std::size_t sample, std::size_t dim) const {
    return imputed_mask[sample * imputed.dims() + dim] != 0;
  }
  std::size_t imputed_count() const {
    return static_cast<std::size_t>(
        std::count(imputed_mask.begin(), imputed_mask.end(), std::uint8_t{1}));
  }
};

namespace detail {

inline void check_pair(const Dataset& complete, const Dataset& incomplete) {
  if (complete.K() != incomplete.K() || complete.F() != incomplete.F()) {
    throw Error("imputation: complete and incomplete data differ in K or F");
  }
}

/// Writes `filled` (rows x dims, values for missing entries) into a copy of
/// the incomplete dataset.
inline ImputationResult assemble(std::string method, const Dataset& incomplete,
                                 const std::vector<double>& filled,
                                 std::vector<DrawDiagnostics> diagnostics) {
  const std::size_t K = incomplete.K(), F = incomplete.F(), D = K * F;
  std::vector<MultiViewSample> out = incomplete.samples();
  std::vector<std::uint8_t> mask(incomplete.size() * D, 0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t k = 0; k < K; ++k) {
      auto& block = out[i].blocks[k];
      if (block.present) continue;
      block.values.assign(F, 0.0);
      for (std::size_t f = 0; f < F; ++f) {
        const std::size_t d = k * F + f;
        block.values[f] = filled[i * D + d];
        mask[i * D + d] = 1;
      }
      block.present = true;
    }
  }
  return ImputationResult{std::move(method), Dataset(incomplete.config(), std::move(out)),
                          std::move(mask), std::move(diagnostics)};
}

}  // namespace detail

/// Imputes every missing scalar of `incomplete`. The survival forest is
/// trained on complete and incomplete samples together, labels as target.
inline ImputationResult impute_rsf(const Dataset& complete, const Dataset& incomplete,
                                   const SurvivalConfig& config, unsigned threads = 0) {
  config.validate();
  detail::check_pair(complete, incomplete);
  if (complete.empty()) {
    throw Error("impute_rsf: complete set is empty, no distribution to learn from");
  }
  const Dataset all = concat(complete, incomplete);
  if (auto dim = all.first_unobserved_dim()) {
    throw Error("impute_rsf: dimension " + std::to_string(*dim) +
                " has no observed value");
  }
  const FeatureTable table = FeatureTable::from_dataset(all);
  const std::size_t D = table.cols;
  const std::size_t offset = complete.size();

  std::vector<bool> categorical(D, false);
  for (auto d : config.categorical_dims) {
    if (d >= D) throw Error("impute_rsf: categorical dimension out of range");
    categorical[d] = true;
  }

  // Global observed means, used when no terminal node holds a value.
  std::vector<double> global_mean(D, 0.0);
  {
    std::vector<std::size_t> cnt(D, 0);
    for (std::size_t i = 0; i < table.rows; ++i) {
      for (std::size_t d = 0; d < D; ++d) {
        if (table.is_observed(i, d)) {
          global_mean[d] += table.at(i, d);
          ++cnt[d];
        }
      }
    }
    for (std::size_t d = 0; d < D; ++d) global_mean[d] /= static_cast<double>(cnt[d]);
  }

  std::vector<double> soft;  // rows x D, current imputations for missing entries
  SurvivalForest forest;
  std::vector<DrawDiagnostics> diagnostics;
  for (std::size_t it = 0; it < config.n_iterations; ++it) {
    const std::uint64_t stream =
        it == 0 ? config.seed : derive_seed(config.seed, "iteration-" + std::to_string(it));
    forest = grow_survival_forest(table, config, stream, it == 0 ? nullptr : &soft, threads);
    if (it == 0) diagnostics = forest.diagnostics();

    // Per tree, per terminal node: sum and count of observed values per dim.
    const auto& trees = forest.trees();
    std::vector<std::vector<double>> sums(trees.size());
    std::vector<std::vector<std::uint32_t>> counts(trees.size());
    parallel_for(trees.size(), threads, [&](std::size_t t) {
      const auto& tree = trees[t];
      sums[t].assign(tree.leaf_members.size() * D, 0.0);
      counts[t].assign(tree.leaf_members.size() * D, 0);
      for (std::size_t leaf = 0; leaf < tree.leaf_members.size(); ++leaf) {
        for (auto s : tree.leaf_members[leaf]) {
          for (std::size_t d = 0; d < D; ++d) {
            if (table.is_observed(s, d)) {
              sums[t][leaf * D + d] += table.at(s, d);
              ++counts[t][leaf * D + d];
            }
          }
        }
      }
    });

    std::vector<double> next(table.rows * D, 0.0);
    parallel_for(table.rows, threads, [&](std::size_t i) {
      for (std::size_t d = 0; d < D; ++d) {
        if (table.is_observed(i, d)) continue;
        double value;
        if (categorical[d]) {
          std::map<double, std::size_t> votes;
          for (const auto& tree : trees) {
            for (auto s : tree.leaf_members[tree.terminal[i]]) {
              if (table.is_observed(s, d)) ++votes[table.at(s, d)];
            }
          }
          value = global_mean[d];
          std::size_t top = 0;
          for (const auto& [v, c] : votes) {
            if (c > top) {
              top = c;
              value = v;
            }
          }
        } else if (config.aggregation == TerminalAggregation::pooled) {
          double sum = 0.0;
          std::size_t cnt = 0;
          for (std::size_t t = 0; t < trees.size(); ++t) {
            const std::size_t at = trees[t].terminal[i] * D + d;
            sum += sums[t][at];
            cnt += counts[t][at];
          }
          value = cnt > 0 ? sum / static_cast<double>(cnt) : global_mean[d];
        } else {
          double sum = 0.0;
          std::size_t used = 0;
          for (std::size_t t = 0; t < trees.size(); ++t) {
            const std::size_t at = trees[t].terminal[i] * D + d;
            if (counts[t][at] > 0) {
              sum += sums[t][at] / counts[t][at];
              ++used;
            }
          }
          value = used > 0 ? sum / static_cast<double>(used) : global_mean[d];
        }
        next[i * D + d] = value;
      }
    });
    soft = std::move(next);
  }

  std::vector<double> filled(incomplete.size() * D, 0.0);
  std::copy(soft.begin() + static_cast<std::ptrdiff_t>(offset * D), soft.end(),
            filled.begin());
  return detail::assemble("rsf", incomplete, filled, std::move(diagnostics));
}

/// Copies missing dimensions from the complete sample nearest in
/// range-normalized L2 over the target's observed dimensions.
inline ImputationResult impute_nn(const Dataset& complete, const Dataset& incomplete,
                                  unsigned threads = 0) {
  detail::check_pair(complete, incomplete);
  if (complete.empty()) throw Error("impute_nn: complete set is empty");
  const FeatureTable donors = FeatureTable::from_dataset(complete, false);
  if (!donors.fully_observed()) {
    throw Error("impute_nn: donor set contains missing values");
  }
  const FeatureTable target = FeatureTable::from_dataset(incomplete, false);
  const std::size_t D = donors.cols;
  std::vector<double> scale(D, 1.0);
  for (std::size_t d = 0; d < D; ++d) {
    const double w = complete.dim_ranges()[d].width();
    if (w > 0.0) scale[d] = 1.0 / w;
  }

  std::vector<double> filled(target.rows * D, 0.0);
  parallel_for(target.rows, threads, [&](std::size_t i) {
    std::vector<std::size_t> obs;
    for (std::size_t d = 0; d < D; ++d) {
      if (target.is_observed(i, d)) obs.push_back(d);
    }
    if (obs.size() == D) return;
    if (obs.empty()) {
      throw Error("impute_nn: sample " + std::to_string(i) +
                  " shares no observed dimension with the donors");
    }
    std::size_t best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < donors.rows; ++j) {
      double dist = 0.0;
      for (auto d : obs) {
        const double diff = (target.at(i, d) - donors.at(j, d)) * scale[d];
        dist += diff * diff;
      }
      if (dist < best_dist) {
        best_dist = dist;
        best = j;
      }
    }
    for (std::size_t d = 0; d < D; ++d) {
      if (!target.is_observed(i, d)) filled[i * D + d] = donors.at(best, d);
    }
  });
  std::vector<DrawDiagnostics> diag(D);
  for (std::size_t d = 0; d < D; ++d) diag[d].global = complete.dim_ranges()[d];
  return detail::assemble("nn", incomplete, filled, std::move(diag));
}

/// Fills each missing scalar with the mean of its dimension over the
/// observed values of `complete`.
inline ImputationResult impute_mean(const Dataset& complete, const Dataset& incomplete) {
  detail::check_pair(complete, incomplete);
  const FeatureTable source = FeatureTable::from_dataset(complete, false);
  const FeatureTable target = FeatureTable::from_dataset(incomplete, false);
  const std::size_t D = target.cols;
  std::vector<double> mean(D, 0.0);
  std::vector<std::size_t> cnt(D, 0);
  for (std::size_t i = 0; i < source.rows; ++i) {
    for (std::size_t d = 0; d < D; ++d) {
      if (source.is_observed(i, d)) {
        mean[d] += source.at(i, d);
        ++cnt[d];
      }
    }
  }
  for (std::size_t d = 0; d < D; ++d) {
    if (cnt[d] == 0) {
      throw Error("impute_mean: dimension " + std::to_string(d) +
                  " has no observed value in the complete set");
    }
    mean[d] /= static_cast<double>(cnt[d]);
  }
  std::vector<double> filled(target.rows * D, 0.0);
  for (std::size_t i = 0; i < target.rows; ++i) {
    for (std::size_t d = 0; d < D; ++d) {
      if (!target.is_observed(i, d)) filled[i * D + d] = mean[d];
    }
  }
  std::vector<DrawDiagnostics> diag(D);
  for (std::size_t d = 0; d < D; ++d) diag[d].global = complete.dim_ranges()[d];
  return detail::assemble("mean", incomplete, filled, std::move(diag));
}

struct DimErrorStats {
  std::size_t count = 0;
  double mean = 0.0;
  double max = 0.0;
};

struct ImputationErrorReport {
  /// |imputed - true| / (max_d - min_d) for every imputed scalar, sample-major.
  std::vector<double> errors;
  std::vector<std::size_t> error_dims;
  double mean_error = 0.0;
  std::vector<double> thresholds;
  /// Fraction of imputed scalars with error <= thresholds[i].
  std::vector<double> fraction_within;
  std::vector<DimErrorStats> per_dim;
  /// Zero-range dimensions, left out of every statistic.
  std::vector<std::size_t> excluded_dims;

  double fraction_at(double t) const {
    if (errors.empty()) return 1.0;
    const auto n = std::count_if(errors.begin(), errors.end(),
                                 [t](double e) { return e <= t; });
    return static_cast<double>(n) / static_cast<double>(errors.size());
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["imputed_scalars"] = errors.size();
    j["mean_error"] = mean_error;
    j["thresholds"] = thresholds;
    j["fraction_within"] = fraction_within;
    auto dims = nlohmann::ordered_json::array();
    for (std::size_t d = 0; d < per_dim.size(); ++d) {
      nlohmann::ordered_json dj;
      dj["dim"] = d;
      dj["count"] = per_dim[d].count;
      dj["mean"] = per_dim[d].mean;
      dj["max"] = per_dim[d].max;
      dims.push_back(std::move(dj));
    }
    j["per_dim"] = std::move(dims);
    j["excluded_dims"] = excluded_dims;
    return j;
  }
};

/// Threshold grid 0, 1/steps, ..., 1.
inline std::vector<double> threshold_grid(std::size_t steps = 100) {
  std::vector<double> g(steps + 1);
  for (std::size_t i = 0; i <= steps; ++i) {
    g[i] = static_cast<double>(i) / static_cast<double>(steps);
  }
  return g;
}

/// Errors are normalized by the per-dimension range of `truth`.
inline ImputationErrorReport imputation_error(const ImputationResult& result,
                                              const Dataset& truth,
                                              std::vector<double> thresholds = threshold_grid()) {
  const Dataset& imp = result.imputed;
  if (truth.size() != imp.size() || truth.K() != imp.K() || truth.F() != imp.F()) {
    throw Error("imputation_error: truth and imputed data differ in shape");
  }
  const FeatureTable t = FeatureTable::from_dataset(truth, false);
  if (!t.fully_observed()) throw Error("imputation_error: truth must be complete");
  const FeatureTable x = FeatureTable::from_dataset(imp, false);
  const std::size_t D = t.cols;

  ImputationErrorReport r;
  r.per_dim.assign(D, {});
  std::vector<bool> excluded(D, false);
  for (std::size_t d = 0; d < D; ++d) {
    if (!(truth.dim_ranges()[d].width() > 0.0)) {
      excluded[d] = true;
      r.excluded_dims.push_back(d);
    }
  }
  double total = 0.0;
  for (std::size_t i = 0; i < t.rows; ++i) {
    for (std::size_t d = 0; d < D; ++d) {
      if (!result.is_imputed(i, d) || excluded[d]) continue;
      const double e = std::abs(x.at(i, d) - t.at(i, d)) / truth.dim_ranges()[d].width();
      r.errors.push_back(e);
      r.error_dims.push_back(d);
      total += e;
      auto& pd = r.per_dim[d];
      ++pd.count;
      pd.mean += e;
      pd.max = std::max(pd.max, e);
    }
  }
  for (auto& pd : r.per_dim) {
    if (pd.count > 0) pd.mean /= static_cast<double>(pd.count);
  }
  r.mean_error = r.errors.empty() ? 0.0 : total / static_cast<double>(r.errors.size());
  std::vector<double> sorted = r.errors;
  std::sort(sorted.begin(), sorted.end());
  r.thresholds = std::move(thresholds);
  for (double th : r.thresholds) {
    const auto n = std::upper_bound(sorted.begin(), sorted.end(), th) - sorted.begin();
    r.fraction_within.push_back(sorted.empty() ? 1.0
                                               : static_cast<double>(n) /
                                                     static_cast<double>(sorted.size()));
  }
  return r;
}

}  // namespace camsel
