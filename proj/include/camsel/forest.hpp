#pragma once

// Random-forest classifier over flattened multi-view features. Leaves keep
// class histograms and, optionally, the ids of the training samples they
// hold so predictions can be traced back to contributing examples.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "camsel/core_model.hpp"
#include "camsel/parallel.hpp"
#include "camsel/rng.hpp"
#include "camsel/split.hpp"
#include "json.hpp"

namespace camsel {

struct ForestConfig {
  std::size_t n_trees = 20;
  std::size_t max_depth = 20;
  std::size_t min_leaf = 5;
  /// 0 selects ceil(sqrt(dims)).
  std::size_t mtry = 0;
  bool bootstrap = true;
  bool track_members = true;
  std::uint64_t seed = 0;

  std::size_t resolved_mtry(std::size_t dims) const {
    return mtry == 0 ? detail::default_mtry(dims) : std::min(mtry, dims);
  }

  void validate() const {
    if (n_trees == 0) throw Error("forest config: n_trees must be >= 1");
    if (min_leaf == 0) throw Error("forest config: min_leaf must be >= 1");
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["n_trees"] = n_trees;
    j["max_depth"] = max_depth;
    j["min_leaf"] = min_leaf;
    j["mtry"] = mtry;
    j["bootstrap"] = bootstrap;
    j["track_members"] = track_members;
    j["seed"] = seed;
    return j;
  }

  static ForestConfig from_json(const nlohmann::json& j) {
    ForestConfig c;
    c.n_trees = j.value("n_trees", c.n_trees);
    c.max_depth = j.value("max_depth", c.max_depth);
    c.min_leaf = j.value("min_leaf", c.min_leaf);
    c.mtry = j.value("mtry", c.mtry);
    c.bootstrap = j.value("bootstrap", c.bootstrap);
    c.track_members = j.value("track_members", c.track_members);
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
  }
};

struct TreeNode {
  /// -1 marks a leaf.
  std::int32_t split_dim = -1;
  double threshold = 0.0;
  std::uint32_t left = 0;
  std::uint32_t right = 0;
  /// Index into the tree's leaves when split_dim < 0.
  std::uint32_t leaf = 0;

  bool is_leaf() const { return split_dim < 0; }
};

struct TreeLeaf {
  std::vector<std::uint32_t> histogram;
  /// Training sample ids (bootstrap duplicates included); empty unless tracked.
  std::vector<std::uint32_t> members;

  std::uint32_t total() const {
    std::uint32_t t = 0;
    for (auto c : histogram) t += c;
    return t;
  }
};

struct DecisionTree {
  std::vector<TreeNode> nodes;
  std::vector<TreeLeaf> leaves;

  /// Values <= threshold go left.
  std::uint32_t leaf_index(std::span<const double> x) const {
    std::uint32_t n = 0;
    while (!nodes[n].is_leaf()) {
      const auto& node = nodes[n];
      n = x[static_cast<std::size_t>(node.split_dim)] <= node.threshold ? node.left
                                                                       : node.right;
    }
    return nodes[n].leaf;
  }

  std::size_t depth() const {
    std::size_t best = 0;
    std::vector<std::pair<std::uint32_t, std::size_t>> stack{{0, 0}};
    while (!stack.empty()) {
      auto [n, d] = stack.back();
      stack.pop_back();
      best = std::max(best, d);
      if (!nodes[n].is_leaf()) {
        stack.push_back({nodes[n].left, d + 1});
        stack.push_back({nodes[n].right, d + 1});
      }
    }
    return best;
  }
};

class Forest {
 public:
  Forest() = default;
  Forest(ForestConfig config, std::size_t classes, std::size_t dims,
         std::vector<DecisionTree> trees)
      : config_(config), classes_(classes), dims_(dims), trees_(std::move(trees)) {}

  const ForestConfig& config() const { return config_; }
  std::size_t classes() const { return classes_; }
  std::size_t dims() const { return dims_; }
  const std::vector<DecisionTree>& trees() const { return trees_; }
  bool tracks_members() const { return config_.track_members; }

  /// Mean over trees of the reached leaf's class frequencies.
  std::vector<double> predict_proba(std::span<const double> x) const {
    check_input(x);
    std::vector<double> p(classes_, 0.0);
    for (const auto& t : trees_) {
      const auto& leaf = t.leaves[t.leaf_index(x)];
      const double total = leaf.total();
      for (std::size_t c = 0; c < classes_; ++c) {
        p[c] += static_cast<double>(leaf.histogram[c]) / total;
      }
    }
    for (double& v : p) v /= static_cast<double>(trees_.size());
    return p;
  }

  /// Argmax of predict_proba; ties go to the lowest camera index.
  CameraId predict(std::span<const double> x) const {
    return argmax(predict_proba(x));
  }

  std::vector<CameraId> predict_batch(const FeatureTable& t) const {
    std::vector<CameraId> out;
    out.reserve(t.rows);
    for (std::size_t i = 0; i < t.rows; ++i) out.push_back(predict(t.row(i)));
    return out;
  }

  static CameraId argmax(std::span<const double> p) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < p.size(); ++c) {
      if (p[c] > p[best]) best = c;
    }
    return CameraId(static_cast<std::uint32_t>(best));
  }

  /// Training ids found in the leaves x reaches, ranked by the number of
  /// trees whose leaf contains them, ties by ascending id.
  std::vector<std::uint32_t> dominant_contributors(std::span<const double> x) const {
    if (!config_.track_members) {
      throw Error("dominant_contributors: forest was trained without member tracking");
    }
    check_input(x);
    std::map<std::uint32_t, std::size_t> counts;
    std::vector<std::uint32_t> distinct;
    for (const auto& t : trees_) {
      distinct = t.leaves[t.leaf_index(x)].members;
      std::sort(distinct.begin(), distinct.end());
      distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
      for (auto id : distinct) ++counts[id];
    }
    std::vector<std::pair<std::uint32_t, std::size_t>> ranked(counts.begin(),
                                                              counts.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      return a.second > b.second;
    });
    std::vector<std::uint32_t> out;
    out.reserve(ranked.size());
    for (const auto& r : ranked) out.push_back(r.first);
    return out;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["format"] = "camsel-forest";
    j["version"] = 1;
    j["classes"] = classes_;
    j["dims"] = dims_;
    j["config"] = config_.to_json();
    auto trees = nlohmann::ordered_json::array();
    for (const auto& t : trees_) {
      auto nodes = nlohmann::ordered_json::array();
      for (const auto& n : t.nodes) {
        if (n.is_leaf()) {
          nodes.push_back({-1, n.leaf});
        } else {
          nodes.push_back({n.split_dim, n.threshold, n.left, n.right});
        }
      }
      auto leaves = nlohmann::ordered_json::array();
      for (const auto& l : t.leaves) {
        nlohmann::ordered_json lj;
        lj["histogram"] = l.histogram;
        if (config_.track_members) lj["members"] = l.members;
        leaves.push_back(std::move(lj));
      }
      nlohmann::ordered_json tj;
      tj["nodes"] = std::move(nodes);
      tj["leaves"] = std::move(leaves);
      trees.push_back(std::move(tj));
    }
    j["trees"] = std::move(trees);
    return j;
  }

  static Forest from_json(const nlohmann::json& j) {
    try {
      if (j.at("format").get<std::string>() != "camsel-forest") {
        throw Error("not a camsel forest model");
      }
      if (j.at("version").get<int>() != 1) {
        throw Error("unsupported forest model version");
      }
      Forest f;
      f.classes_ = j.at("classes").get<std::size_t>();
      f.dims_ = j.at("dims").get<std::size_t>();
      f.config_ = ForestConfig::from_json(j.at("config"));
      for (const auto& tj : j.at("trees")) {
        DecisionTree t;
        for (const auto& nj : tj.at("nodes")) {
          TreeNode n;
          n.split_dim = nj.at(0).get<std::int32_t>();
          if (n.is_leaf()) {
            n.leaf = nj.at(1).get<std::uint32_t>();
          } else {
            n.threshold = nj.at(1).get<double>();
            n.left = nj.at(2).get<std::uint32_t>();
            n.right = nj.at(3).get<std::uint32_t>();
          }
          t.nodes.push_back(n);
        }
        for (const auto& lj : tj.at("leaves")) {
          TreeLeaf l;
          l.histogram = lj.at("histogram").get<std::vector<std::uint32_t>>();
          if (lj.contains("members")) {
            l.members = lj.at("members").get<std::vector<std::uint32_t>>();
          }
          t.leaves.push_back(std::move(l));
        }
        f.validate_tree(t);
        f.trees_.push_back(std::move(t));
      }
      if (f.trees_.empty()) throw Error("forest model has no trees");
      return f;
    } catch (const nlohmann::json::exception& e) {
      throw Error(std::string("malformed forest model: ") + e.what());
    }
  }

  friend bool operator==(const Forest& a, const Forest& b) {
    return a.to_json() == b.to_json();
  }

 private:
  void check_input(std::span<const double> x) const {
    if (x.size() != dims_) {
      throw Error("input has " + std::to_string(x.size()) +
                  " dimensions, forest expects " + std::to_string(dims_));
    }
  }

  void validate_tree(const DecisionTree& t) const {
    if (t.nodes.empty()) throw Error("forest model: empty tree");
    for (const auto& n : t.nodes) {
      if (n.is_leaf()) {
        if (n.leaf >= t.leaves.size()) throw Error("forest model: bad leaf index");
      } else if (static_cast<std::size_t>(n.split_dim) >= dims_ ||
                 n.left >= t.nodes.size() || n.right >= t.nodes.size()) {
        throw Error("forest model: bad node");
      }
    }
    for (const auto& l : t.leaves) {
      if (l.histogram.size() != classes_ || l.total() == 0) {
        throw Error("forest model: bad leaf histogram");
      }
    }
  }

  ForestConfig config_;
  std::size_t classes_ = 0;
  std::size_t dims_ = 0;
  std::vector<DecisionTree> trees_;
};

namespace detail {

class TreeGrower {
 public:
  TreeGrower(const FeatureTable& data, const ForestConfig& config, Rng& rng,
             const XLogX& xlogx)
      : data_(data), config_(config), rng_(rng), xlogx_(xlogx),
        mtry_(config.resolved_mtry(data.cols)) {}

  DecisionTree grow(std::vector<std::uint32_t> samples) {
    tree_.nodes.push_back({});
    build(0, std::move(samples), 0);
    return std::move(tree_);
  }

 private:
  void make_leaf(std::uint32_t node, const std::vector<std::uint32_t>& samples) {
    TreeLeaf leaf;
    leaf.histogram.assign(data_.classes, 0);
    for (auto s : samples) ++leaf.histogram[data_.labels[s]];
    if (config_.track_members) leaf.members = samples;
    tree_.nodes[node].split_dim = -1;
    tree_.nodes[node].leaf = static_cast<std::uint32_t>(tree_.leaves.size());
    tree_.leaves.push_back(std::move(leaf));
  }

  void build(std::uint32_t node, std::vector<std::uint32_t> samples, std::size_t depth) {
    const std::size_t n = samples.size();
    bool pure = true;
    for (auto s : samples) {
      if (data_.labels[s] != data_.labels[samples.front()]) {
        pure = false;
        break;
      }
    }
    if (pure || depth >= config_.max_depth || n < 2 * config_.min_leaf) {
      make_leaf(node, samples);
      return;
    }

    Split best;
    for (std::size_t dim : sample_dims(data_.cols, mtry_, rng_, dim_scratch_)) {
      entries_.clear();
      for (auto s : samples) {
        entries_.push_back({data_.at(s, dim), data_.labels[s], s});
      }
      std::sort(entries_.begin(), entries_.end(), value_order);
      scan_sorted(entries_, data_.classes, config_.min_leaf, dim, xlogx_, best,
                  left_counts_, right_counts_);
    }
    if (!best.valid()) {
      make_leaf(node, samples);
      return;
    }

    std::vector<std::uint32_t> left, right;
    left.reserve(best.n_left);
    right.reserve(best.n_right);
    for (auto s : samples) {
      (data_.at(s, best.dim) <= best.threshold ? left : right).push_back(s);
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
    build(l, std::move(left), depth + 1);
    build(r, std::move(right), depth + 1);
  }

  const FeatureTable& data_;
  const ForestConfig& config_;
  Rng& rng_;
  const XLogX& xlogx_;
  std::size_t mtry_;
  DecisionTree tree_;
  std::vector<ValueLabel> entries_;
  std::vector<std::size_t> dim_scratch_;
  std::vector<std::uint32_t> left_counts_, right_counts_;
};

}  // namespace detail

/// Trains one tree per independent stream seeded with seed + tree index, so
/// the result does not depend on `threads`.
inline Forest train_forest(const FeatureTable& data, const ForestConfig& config,
                           unsigned threads = 0) {
  config.validate();
  if (data.rows == 0) throw Error("train_forest: empty training set");
  if (!data.fully_observed()) {
    throw Error("train_forest: training data has missing dimensions; impute first");
  }
  std::vector<std::size_t> seen(data.classes, 0);
  for (auto l : data.labels) {
    if (l >= data.classes) throw Error("train_forest: label out of range");
    ++seen[l];
  }
  if (std::count_if(seen.begin(), seen.end(), [](std::size_t c) { return c > 0; }) < 2) {
    throw Error("train_forest: need at least two classes");
  }

  const detail::XLogX xlogx(data.rows);
  std::vector<DecisionTree> trees(config.n_trees);
  parallel_for(config.n_trees, threads, [&](std::size_t t) {
    Rng rng(config.seed + t);
    std::vector<std::uint32_t> samples(data.rows);
    if (config.bootstrap) {
      for (auto& s : samples) {
        s = static_cast<std::uint32_t>(uniform_index(rng, data.rows));
      }
      std::sort(samples.begin(), samples.end());
    } else {
      for (std::size_t i = 0; i < data.rows; ++i) samples[i] = static_cast<std::uint32_t>(i);
    }
    detail::TreeGrower grower(data, config, rng, xlogx);
    trees[t] = grower.grow(std::move(samples));
  });
  return Forest(config, data.classes, data.cols, std::move(trees));
}

inline Forest train_forest(const Dataset& d, const ForestConfig& config,
                           unsigned threads = 0) {
  return train_forest(FeatureTable::from_dataset(d), config, threads);
}

}  // namespace camsel
