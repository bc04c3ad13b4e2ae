#pragma once

// Leave-sequences-out cross-validation, accuracy reports, baselines.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "camsel/core_model.hpp"
#include "camsel/forest.hpp"
#include "camsel/pipeline.hpp"
#include "camsel/rng.hpp"
#include "camsel/rsf_impute.hpp"
#include "json.hpp"

namespace camsel {

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

inline std::string sequence_key(const MultiViewSample& s) {
  return s.game_id + "/" + s.sequence_id;
}

/// Whole sequences are dealt round-robin into folds, in the order of a
/// seeded hash of their key. Sample ids within a fold are ascending.
inline std::vector<Fold> cv_splits(const Dataset& d, std::size_t n_folds = 3,
                                   std::uint64_t seed = 0) {
  if (n_folds < 2) throw Error("cv_splits: need at least 2 folds");
  std::map<std::string, std::vector<std::size_t>> by_sequence;
  for (std::size_t i = 0; i < d.size(); ++i) by_sequence[sequence_key(d[i])].push_back(i);
  if (by_sequence.size() < n_folds) {
    throw Error("cv_splits: " + std::to_string(by_sequence.size()) +
                " sequences cannot fill " + std::to_string(n_folds) + " folds");
  }
  std::vector<std::pair<std::uint64_t, std::string>> order;
  for (const auto& [key, ids] : by_sequence) {
    order.emplace_back(splitmix64(fnv1a64(key) ^ seed), key);
  }
  std::sort(order.begin(), order.end());

  std::vector<std::size_t> fold_of(d.size(), 0);
  for (std::size_t r = 0; r < order.size(); ++r) {
    for (auto id : by_sequence[order[r].second]) fold_of[id] = r % n_folds;
  }
  std::vector<Fold> folds(n_folds);
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (std::size_t f = 0; f < n_folds; ++f) {
      (fold_of[i] == f ? folds[f].test : folds[f].train).push_back(i);
    }
  }
  return folds;
}

struct SwitchStats {
  std::size_t segments = 0;
  std::size_t min_length = 0;
  double mean_length = 0.0;

  nlohmann::ordered_json to_json() const {
    return {{"segments", segments}, {"min_length", min_length}, {"mean_length", mean_length}};
  }
};

/// Runs of equal camera ids over a set of independent streams.
inline SwitchStats switch_stats(const std::vector<std::vector<CameraId>>& streams) {
  SwitchStats s;
  std::size_t frames = 0;
  for (const auto& stream : streams) {
    std::size_t i = 0;
    while (i < stream.size()) {
      std::size_t j = i;
      while (j < stream.size() && stream[j] == stream[i]) ++j;
      const std::size_t len = j - i;
      s.min_length = s.segments == 0 ? len : std::min(s.min_length, len);
      ++s.segments;
      frames += len;
      i = j;
    }
  }
  s.mean_length = s.segments == 0 ? 0.0 : static_cast<double>(frames) / static_cast<double>(s.segments);
  return s;
}

struct EvalReport {
  static constexpr int kSchemaVersion = 1;

  std::vector<std::string> camera_names;
  std::size_t samples = 0;
  double overall_accuracy = 0.0;
  /// Recall per true camera; empty when the camera never occurs.
  std::vector<std::optional<double>> per_camera_accuracy;
  /// confusion[true][predicted]
  std::vector<std::vector<std::size_t>> confusion;
  std::vector<double> fold_accuracies;
  std::optional<ImputationErrorReport> imputation;
  SwitchStats switches_raw;
  std::optional<SwitchStats> switches_smoothed;
  std::optional<TrainingReport> last_training;

  std::size_t trace() const {
    std::size_t t = 0;
    for (std::size_t k = 0; k < confusion.size(); ++k) t += confusion[k][k];
    return t;
  }
  std::size_t total() const {
    std::size_t t = 0;
    for (const auto& row : confusion) {
      for (auto c : row) t += c;
    }
    return t;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["schema"] = "camsel-eval-report";
    j["version"] = kSchemaVersion;
    j["samples"] = samples;
    j["overall_accuracy"] = overall_accuracy;
    nlohmann::ordered_json per = nlohmann::ordered_json::object();
    for (std::size_t k = 0; k < per_camera_accuracy.size(); ++k) {
      const auto& name = k < camera_names.size() ? camera_names[k] : std::to_string(k);
      if (per_camera_accuracy[k]) {
        per[name] = *per_camera_accuracy[k];
      } else {
        per[name] = nullptr;
      }
    }
    j["per_camera_accuracy"] = std::move(per);
    j["confusion"] = confusion;
    j["fold_accuracies"] = fold_accuracies;
    nlohmann::ordered_json sw;
    sw["raw"] = switches_raw.to_json();
    if (switches_smoothed) sw["smoothed"] = switches_smoothed->to_json();
    j["switch_stats"] = std::move(sw);
    if (imputation) j["imputation"] = imputation->to_json();
    if (last_training) j["training"] = last_training->to_json();
    return j;
  }

  void write_confusion_csv(std::ostream& out) const {
    out << "true\\predicted";
    for (std::size_t k = 0; k < confusion.size(); ++k) {
      out << ',' << (k < camera_names.size() ? camera_names[k] : std::to_string(k));
    }
    out << '\n';
    for (std::size_t k = 0; k < confusion.size(); ++k) {
      out << (k < camera_names.size() ? camera_names[k] : std::to_string(k));
      for (auto c : confusion[k]) out << ',' << c;
      out << '\n';
    }
  }
};

using Predictor = std::function<CameraId(const MultiViewSample&)>;

/// Always emits the most frequent training label, ties to the lowest index.
struct ConstantPredictor {
  CameraId camera;
  CameraId operator()(const MultiViewSample&) const { return camera; }
};

inline ConstantPredictor baseline_constant(const Dataset& train) {
  std::vector<std::size_t> counts(train.K(), 0);
  for (const auto& s : train.samples()) {
    if (s.label) ++counts[s.label->index];
  }
  std::size_t best = 0;
  for (std::size_t k = 1; k < counts.size(); ++k) {
    if (counts[k] > counts[best]) best = k;
  }
  if (counts[best] == 0) throw Error("baseline_constant: no labeled training samples");
  return {CameraId(static_cast<std::uint32_t>(best))};
}

inline Predictor forest_predictor(Forest model) {
  return [m = std::move(model)](const MultiViewSample& s) {
    const auto [x, mask] = flatten(s, m.dims() / m.classes());
    return m.predict(x);
  };
}

namespace detail {

inline void finalize(EvalReport& r) {
  const std::size_t K = r.confusion.size();
  r.samples = r.total();
  r.overall_accuracy =
      r.samples == 0 ? 0.0 : static_cast<double>(r.trace()) / static_cast<double>(r.samples);
  r.per_camera_accuracy.assign(K, std::nullopt);
  for (std::size_t k = 0; k < K; ++k) {
    std::size_t row = 0;
    for (auto c : r.confusion[k]) row += c;
    if (row > 0) {
      r.per_camera_accuracy[k] = static_cast<double>(r.confusion[k][k]) / static_cast<double>(row);
    }
  }
}

}  // namespace detail

/// Cross-validates any learner. `train` maps a training subset to a
/// Predictor; held-out predictions accumulate into one confusion matrix.
/// Switch statistics use each test sequence's predictions in frame order,
/// smoothed as well when `smooth_min_duration` is set.
template <class Trainer>
EvalReport evaluate_with(const Dataset& d, const std::vector<Fold>& folds, Trainer&& train,
                         std::optional<std::size_t> smooth_min_duration = std::nullopt) {
  EvalReport r;
  const std::size_t K = d.K();
  for (std::size_t k = 0; k < K; ++k) r.camera_names.push_back(d.config().camera_name(k));
  r.confusion.assign(K, std::vector<std::size_t>(K, 0));
  std::vector<std::vector<CameraId>> raw_streams, smooth_streams;

  for (const auto& fold : folds) {
    if (fold.test.empty() || fold.train.empty()) throw Error("evaluate: empty fold");
    const Dataset train_set = d.subset(fold.train);
    Predictor predict = train(train_set);

    std::size_t correct = 0;
    std::map<std::string, std::vector<std::pair<std::int64_t, CameraId>>> by_seq;
    for (auto id : fold.test) {
      const auto& s = d[id];
      if (!s.label) throw Error("evaluate: unlabeled test sample");
      const CameraId p = predict(s);
      ++r.confusion[s.label->index][p.index];
      if (p == *s.label) ++correct;
      by_seq[sequence_key(s)].emplace_back(s.frame_index, p);
    }
    r.fold_accuracies.push_back(static_cast<double>(correct) /
                                static_cast<double>(fold.test.size()));
    for (auto& [key, frames] : by_seq) {
      std::stable_sort(frames.begin(), frames.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });
      std::vector<CameraId> stream;
      for (const auto& f : frames) stream.push_back(f.second);
      if (smooth_min_duration) smooth_streams.push_back(smooth_labels(stream, *smooth_min_duration));
      raw_streams.push_back(std::move(stream));
    }
  }
  r.switches_raw = switch_stats(raw_streams);
  if (smooth_min_duration) r.switches_smoothed = switch_stats(smooth_streams);
  detail::finalize(r);
  return r;
}

/// Cross-validates the full training pipeline on `main`; `aux` (possibly
/// empty) joins every fold's training data.
inline EvalReport evaluate(const PipelineConfig& config, const Dataset& main, const Dataset& aux,
                           const std::vector<Fold>& folds, unsigned threads = 0) {
  std::optional<TrainingReport> last;
  auto trainer = [&](const Dataset& train_set) {
    auto trained = train_full(train_set, aux, config, threads);
    last = trained.report;
    return forest_predictor(std::move(trained.model));
  };
  std::optional<std::size_t> tau;
  if (config.smoothing.enabled) tau = config.smoothing.min_duration;
  EvalReport r = evaluate_with(main, folds, trainer, tau);
  r.last_training = last;
  return r;
}

/// Held-out scoring of one trained model.
inline EvalReport evaluate_model(const Forest& model, const Dataset& test) {
  std::vector<std::size_t> all(test.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  EvalReport r;
  for (std::size_t k = 0; k < test.K(); ++k) r.camera_names.push_back(test.config().camera_name(k));
  r.confusion.assign(test.K(), std::vector<std::size_t>(test.K(), 0));
  const FeatureTable t = FeatureTable::from_dataset(test);
  for (std::size_t i = 0; i < t.rows; ++i) {
    ++r.confusion[t.labels[i]][model.predict(t.row(i)).index];
  }
  detail::finalize(r);
  r.fold_accuracies.push_back(r.overall_accuracy);
  return r;
}

/// Masks the unselected views of the last `holdout_fraction` of a complete
/// dataset, imputes them from the rest with RSF, and scores the result
/// against the withheld values.
inline ImputationErrorReport imputation_probe(const Dataset& complete,
                                              const SurvivalConfig& config,
                                              double holdout_fraction = 0.2,
                                              unsigned threads = 0) {
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
    throw Error("imputation_probe: holdout fraction must be in (0, 1)");
  }
  const auto n_test = std::max<std::size_t>(
      1, static_cast<std::size_t>(static_cast<double>(complete.size()) * holdout_fraction));
  if (n_test >= complete.size()) throw Error("imputation_probe: dataset too small");
  const std::size_t n_train = complete.size() - n_test;
  std::vector<std::size_t> train_ids(n_train), test_ids(n_test);
  for (std::size_t i = 0; i < n_train; ++i) train_ids[i] = i;
  for (std::size_t i = 0; i < n_test; ++i) test_ids[i] = n_train + i;
  const Dataset train = complete.subset(train_ids);
  const Dataset truth = complete.subset(test_ids);

  std::vector<MultiViewSample> masked = truth.samples();
  for (auto& s : masked) {
    for (std::size_t k = 0; k < s.blocks.size(); ++k) {
      if (k != s.label.value().index) s.blocks[k] = FeatureBlock::missing();
    }
  }
  const auto result = impute_rsf(train, Dataset(complete.config(), std::move(masked)), config, threads);
  return imputation_error(result, truth);
}

}  // namespace camsel
