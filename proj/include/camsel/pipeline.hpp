#pragma once

// Training flow: impute auxiliary broadcast-only data, keep the imputed
// samples a complete-data model agrees with, train the final forest on
// main + accepted. Frame-wise prediction and a minimum-duration smoother.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "camsel/core_model.hpp"
#include "camsel/forest.hpp"
#include "camsel/rng.hpp"
#include "camsel/rsf_impute.hpp"
#include "json.hpp"

namespace camsel {

enum class BalanceStrategy {
  none,
  downsample,  // every class cut to the smallest nonempty class count
};

struct VerificationConfig {
  bool enabled = true;
  double min_confidence = 0.0;
};

struct SmoothingConfig {
  bool enabled = false;
  std::size_t min_duration = 60;
};

struct PipelineConfig {
  ForestConfig forest;
  SurvivalConfig survival;
  VerificationConfig verification;
  BalanceStrategy balance = BalanceStrategy::downsample;
  std::uint64_t balance_seed = 0;
  SmoothingConfig smoothing;

  /// Seeds every stage from named sub-streams of one root seed.
  void seed_all(std::uint64_t root) {
    forest.seed = derive_seed(root, "forest");
    survival.seed = derive_seed(root, "rsf");
    balance_seed = derive_seed(root, "balance");
  }

  void validate() const {
    forest.validate();
    survival.validate();
    if (!(verification.min_confidence >= 0.0 && verification.min_confidence <= 1.0)) {
      throw Error("pipeline config: min_confidence must be in [0, 1]");
    }
    if (smoothing.min_duration < 1) {
      throw Error("pipeline config: smoothing min_duration must be >= 1");
    }
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["forest"] = forest.to_json();
    j["survival"] = survival.to_json();
    j["verification"] = {{"enabled", verification.enabled},
                         {"min_confidence", verification.min_confidence}};
    j["balance"] = balance == BalanceStrategy::none ? "none" : "downsample";
    j["balance_seed"] = balance_seed;
    j["smoothing"] = {{"enabled", smoothing.enabled},
                      {"min_duration", smoothing.min_duration}};
    return j;
  }

  static PipelineConfig from_json(const nlohmann::json& j) {
    PipelineConfig c;
    try {
      if (j.contains("forest")) c.forest = ForestConfig::from_json(j.at("forest"));
      if (j.contains("survival")) c.survival = SurvivalConfig::from_json(j.at("survival"));
      if (j.contains("verification")) {
        const auto& v = j.at("verification");
        c.verification.enabled = v.value("enabled", c.verification.enabled);
        c.verification.min_confidence = v.value("min_confidence", c.verification.min_confidence);
      }
      const auto balance = j.value("balance", std::string("downsample"));
      if (balance == "none") {
        c.balance = BalanceStrategy::none;
      } else if (balance == "downsample") {
        c.balance = BalanceStrategy::downsample;
      } else {
        throw Error("pipeline config: balance must be 'none' or 'downsample'");
      }
      c.balance_seed = j.value("balance_seed", c.balance_seed);
      if (j.contains("smoothing")) {
        const auto& s = j.at("smoothing");
        c.smoothing.enabled = s.value("enabled", c.smoothing.enabled);
        c.smoothing.min_duration = s.value("min_duration", c.smoothing.min_duration);
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(std::string("pipeline config: ") + e.what());
    }
    c.validate();
    return c;
  }
};

struct VerificationResult {
  Dataset accepted;
  Dataset rejected;
  std::vector<std::size_t> accepted_ids;
  std::vector<std::size_t> rejected_ids;
};

/// Accepts an imputed sample iff the complete-data model predicts its label
/// with probability at least `min_confidence`.
inline VerificationResult verify_imputed(const Dataset& imputed, const Forest& complete_model,
                                         double min_confidence) {
  if (complete_model.classes() != imputed.K() || complete_model.dims() != imputed.dims()) {
    throw Error("verify_imputed: model does not match the data's cameras or dimensions");
  }
  const FeatureTable table = FeatureTable::from_dataset(imputed);
  if (!table.fully_observed()) {
    throw Error("verify_imputed: data still has missing values");
  }
  VerificationResult r;
  for (std::size_t i = 0; i < table.rows; ++i) {
    const auto proba = complete_model.predict_proba(table.row(i));
    const auto label = table.labels[i];
    const bool ok = Forest::argmax(proba).index == label && proba[label] >= min_confidence;
    (ok ? r.accepted_ids : r.rejected_ids).push_back(i);
  }
  r.accepted = imputed.subset(r.accepted_ids);
  r.rejected = imputed.subset(r.rejected_ids);
  return r;
}

/// Keeps an equal, seeded random share of each nonempty class; input order
/// is preserved among the kept samples.
inline Dataset balance_classes(const Dataset& d, std::uint64_t seed) {
  std::vector<std::vector<std::size_t>> by_class(d.K());
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!d[i].label) throw Error("balance_classes: unlabeled sample");
    by_class[d[i].label->index].push_back(i);
  }
  std::size_t target = d.size();
  for (const auto& c : by_class) {
    if (!c.empty()) target = std::min(target, c.size());
  }
  Rng rng(seed);
  std::vector<std::size_t> keep;
  for (auto& c : by_class) {
    for (std::size_t i = 0; i + 1 < c.size(); ++i) {
      std::swap(c[i], c[i + uniform_index(rng, c.size() - i)]);
    }
    keep.insert(keep.end(), c.begin(),
                c.begin() + static_cast<std::ptrdiff_t>(std::min(target, c.size())));
  }
  std::sort(keep.begin(), keep.end());
  return d.subset(keep);
}

struct TrainingReport {
  std::size_t main_samples = 0;
  std::size_t aux_sampled = 0;
  std::size_t imputed = 0;
  std::size_t imputed_scalars = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t combined = 0;
  std::size_t final_samples = 0;
  std::vector<std::size_t> final_per_class;

  double acceptance_rate() const {
    return imputed == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(imputed);
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["main_samples"] = main_samples;
    j["aux_sampled"] = aux_sampled;
    j["imputed"] = imputed;
    j["imputed_scalars"] = imputed_scalars;
    j["accepted"] = accepted;
    j["rejected"] = rejected;
    j["acceptance_rate"] = acceptance_rate();
    j["combined"] = combined;
    j["final_samples"] = final_samples;
    j["final_per_class"] = final_per_class;
    return j;
  }
};

struct TrainedPipeline {
  Forest model;
  TrainingReport report;
};

/// With empty `aux` this is exactly train_forest(main, config.forest).
inline TrainedPipeline train_full(const Dataset& main, const Dataset& aux,
                                  const PipelineConfig& config, unsigned threads = 0) {
  config.validate();
  if (main.empty()) throw Error("train_full: main dataset is empty");
  if (!std::all_of(main.samples().begin(), main.samples().end(),
                   [](const MultiViewSample& s) { return s.is_complete(); })) {
    throw Error("train_full: main dataset must be complete");
  }
  TrainingReport report;
  report.main_samples = main.size();
  Forest main_model = train_forest(main, config.forest, threads);
  if (aux.empty()) {
    report.combined = report.final_samples = main.size();
    report.final_per_class.assign(main.K(), 0);
    for (const auto& s : main.samples()) ++report.final_per_class[s.label->index];
    return {std::move(main_model), std::move(report)};
  }
  if (aux.K() != main.K() || aux.F() != main.F()) {
    throw Error("train_full: aux and main differ in K or F");
  }

  report.aux_sampled = aux.size();
  const ImputationResult imputed = impute_rsf(main, aux, config.survival, threads);
  report.imputed = imputed.imputed.size();
  report.imputed_scalars = imputed.imputed_count();

  Dataset accepted = imputed.imputed;
  if (config.verification.enabled) {
    auto v = verify_imputed(imputed.imputed, main_model, config.verification.min_confidence);
    accepted = std::move(v.accepted);
    report.rejected = v.rejected.size();
  }
  report.accepted = accepted.size();

  Dataset combined = concat(main, accepted);
  report.combined = combined.size();
  if (config.balance == BalanceStrategy::downsample) {
    combined = balance_classes(combined, config.balance_seed);
  }
  report.final_samples = combined.size();
  report.final_per_class.assign(main.K(), 0);
  for (const auto& s : combined.samples()) ++report.final_per_class[s.label->index];
  return {train_forest(combined, config.forest, threads), std::move(report)};
}

struct SelectionTimeline {
  std::string sequence_id;
  std::vector<std::int64_t> frames;
  std::vector<CameraId> cameras;
  std::vector<std::vector<double>> proba;

  std::size_t size() const { return frames.size(); }

  nlohmann::ordered_json to_json() const {
    auto j = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < frames.size(); ++i) {
      nlohmann::ordered_json f;
      f["frame"] = frames[i];
      f["camera"] = cameras[i].index;
      f["proba"] = proba[i];
      j.push_back(std::move(f));
    }
    return j;
  }

  static SelectionTimeline from_json(const nlohmann::json& j) {
    SelectionTimeline t;
    try {
      for (const auto& f : j) {
        t.frames.push_back(f.at("frame").get<std::int64_t>());
        t.cameras.push_back(CameraId(f.at("camera").get<std::uint32_t>()));
        t.proba.push_back(f.at("proba").get<std::vector<double>>());
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(std::string("malformed timeline: ") + e.what());
    }
    return t;
  }
};

/// Independent per-frame prediction; no temporal coupling.
inline SelectionTimeline predict_sequence(const Forest& model, const Dataset& frames) {
  if (frames.dims() != model.dims() || frames.K() != model.classes()) {
    throw Error("predict_sequence: frames do not match the model's shape");
  }
  const FeatureTable table = FeatureTable::from_dataset(frames, false);
  if (!table.fully_observed()) {
    throw Error("predict_sequence: frames must have every camera view");
  }
  SelectionTimeline t;
  if (!frames.empty()) t.sequence_id = frames[0].sequence_id;
  for (std::size_t i = 0; i < table.rows; ++i) {
    auto p = model.predict_proba(table.row(i));
    t.frames.push_back(frames[i].frame_index);
    t.cameras.push_back(Forest::argmax(p));
    t.proba.push_back(std::move(p));
  }
  return t;
}

/// Greedy left-to-right minimum-duration filter. The current camera holds
/// for at least `min_duration` frames, and a switch is committed only when
/// the new camera persists that long in the input. Every output segment
/// except a lone one on a short input is at least `min_duration` long.
inline std::vector<CameraId> smooth_labels(std::span<const CameraId> raw,
                                           std::size_t min_duration) {
  if (min_duration < 1) throw Error("smooth_labels: min_duration must be >= 1");
  std::vector<CameraId> out(raw.size());
  if (raw.empty()) return out;
  CameraId current = raw[0];
  std::size_t held = 0;  // frames emitted for the current segment
  std::size_t i = 0;
  while (i < raw.size()) {
    if (held >= min_duration && raw[i] != current) {
      std::size_t run = 1;
      while (i + run < raw.size() && raw[i + run] == raw[i] && run < min_duration) ++run;
      if (run >= min_duration) {
        current = raw[i];
        held = 0;
      }
    }
    out[i] = current;
    ++held;
    ++i;
  }
  return out;
}

inline SelectionTimeline smooth_timeline(const SelectionTimeline& t, std::size_t min_duration) {
  SelectionTimeline out = t;
  out.cameras = smooth_labels(t.cameras, min_duration);
  return out;
}

}  // namespace camsel
