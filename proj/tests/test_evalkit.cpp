#include <gtest/gtest.h>

#include <random>
#include <set>
#include <sstream>

#include "camsel/evalkit.hpp"
#include "camsel/synthgen.hpp"
#include "test_util.hpp"

using namespace camsel;
using camsel::testing::config;
using camsel::testing::sample;

namespace {

Dataset sequences(std::size_t n_seq, std::size_t per_seq) {
  std::vector<MultiViewSample> v;
  for (std::size_t s = 0; s < n_seq; ++s) {
    for (std::size_t i = 0; i < per_seq; ++i) {
      v.push_back(sample({{1.0 * i}, {2.0}}, static_cast<std::uint32_t>(i % 2), "q" + std::to_string(s),
                         static_cast<std::int64_t>(i)));
    }
  }
  return Dataset(config(2, 1), v);
}

// Label given by the sign of the first feature of camera 0, with priors set
// by drawing labels first.
Dataset separable(std::size_t n, std::vector<double> priors, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::discrete_distribution<std::uint32_t> lab(priors.begin(), priors.end());
  std::normal_distribution<double> noise(0.0, 0.1);
  std::vector<MultiViewSample> v;
  for (std::size_t i = 0; i < n; ++i) {
    const auto y = lab(rng);
    v.push_back(sample({{10.0 * y + noise(rng)}, {noise(rng)}, {noise(rng)}}, y,
                       "q" + std::to_string(i % 6), static_cast<std::int64_t>(i / 6)));
  }
  return Dataset(config(3, 1), v);
}

}  // namespace

TEST(CvSplits, OneSequencePerFold) {
  const auto d = sequences(3, 10);
  const auto folds = cv_splits(d, 3, 1);
  ASSERT_EQ(folds.size(), 3u);
  std::set<std::string> tested;
  for (const auto& f : folds) {
    std::set<std::string> seqs;
    for (auto id : f.test) seqs.insert(d[id].sequence_id);
    EXPECT_EQ(seqs.size(), 1u);
    tested.insert(*seqs.begin());
  }
  EXPECT_EQ(tested.size(), 3u);
}

TEST(CvSplits, PartitionWithoutStraddling) {
  const auto d = sequences(6, 7);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto folds = cv_splits(d, 3, seed);
    std::vector<int> hits(d.size(), 0);
    for (const auto& f : folds) {
      EXPECT_EQ(f.train.size() + f.test.size(), d.size());
      std::set<std::string> test_seqs, train_seqs;
      for (auto id : f.test) {
        ++hits[id];
        test_seqs.insert(d[id].sequence_id);
      }
      for (auto id : f.train) train_seqs.insert(d[id].sequence_id);
      EXPECT_EQ(test_seqs.size(), 2u);
      for (const auto& s : test_seqs) EXPECT_EQ(train_seqs.count(s), 0u);
    }
    for (int h : hits) EXPECT_EQ(h, 1);
    const auto again = cv_splits(d, 3, seed);
    for (std::size_t f = 0; f < folds.size(); ++f) EXPECT_EQ(again[f].test, folds[f].test);
  }
  EXPECT_THROW(cv_splits(sequences(2, 5), 3, 0), Error);
  EXPECT_THROW(cv_splits(d, 1, 0), Error);
}

TEST(Evaluate, PerfectClassifierOnSeparableData) {
  const auto d = separable(300, {1, 1, 1}, 1);
  PipelineConfig pc;
  pc.seed_all(1);
  const auto r = evaluate(pc, d, Dataset(d.config(), {}), cv_splits(d, 3, 1), 1);
  EXPECT_EQ(r.overall_accuracy, 1.0);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      if (i != j) EXPECT_EQ(r.confusion[i][j], 0u);
    }
  }
}

TEST(Evaluate, ConstantMiddleMatchesPrior) {
  const auto d = separable(3000, {0.25, 0.5, 0.25}, 2);
  const auto r = evaluate_with(d, cv_splits(d, 3, 2), [](const Dataset& tr) -> Predictor {
    return baseline_constant(tr);
  });
  EXPECT_NEAR(r.overall_accuracy, 0.5, 0.03);
  EXPECT_EQ(r.per_camera_accuracy[1].value(), 1.0);
  EXPECT_EQ(r.per_camera_accuracy[0].value(), 0.0);
}

TEST(Evaluate, ReportConsistency) {
  SynthConfig sc;
  sc.n_samples = 300;
  sc.n_sequences = 6;
  sc.p_miss = 0.0;
  const auto d = generate(sc, 1).visible;
  PipelineConfig pc;
  pc.seed_all(3);
  pc.smoothing.enabled = true;
  pc.smoothing.min_duration = 5;
  const auto folds = cv_splits(d, 3, 3);
  const auto r = evaluate(pc, d, Dataset(d.config(), {}), folds, 1);
  std::vector<std::size_t> per_class(3, 0);
  for (const auto& s : d.samples()) ++per_class[s.label->index];
  double recomposed = 0.0;
  for (std::size_t k = 0; k < 3; ++k) {
    std::size_t row = 0;
    for (auto c : r.confusion[k]) row += c;
    EXPECT_EQ(row, per_class[k]);
    if (r.per_camera_accuracy[k]) recomposed += *r.per_camera_accuracy[k] * static_cast<double>(row);
  }
  EXPECT_EQ(r.overall_accuracy, static_cast<double>(r.trace()) / static_cast<double>(r.total()));
  EXPECT_NEAR(recomposed / static_cast<double>(d.size()), r.overall_accuracy, 1e-12);
  EXPECT_EQ(r.fold_accuracies.size(), 3u);
  ASSERT_TRUE(r.switches_smoothed.has_value());
  EXPECT_LE(r.switches_smoothed->segments, r.switches_raw.segments);

  const auto again = evaluate(pc, d, Dataset(d.config(), {}), folds, 2);
  EXPECT_EQ(again.to_json().dump(), r.to_json().dump());
  const auto j = r.to_json();
  EXPECT_EQ(j["schema"], "camsel-eval-report");
  EXPECT_EQ(j["version"], 1);
  EXPECT_TRUE(j["per_camera_accuracy"].contains("middle"));

  std::ostringstream csv;
  r.write_confusion_csv(csv);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "true\\predicted,left,middle,right");
}

TEST(Baseline, ModalLabelLowestOnTies) {
  const auto c = config(3, 1);
  const Dataset a(c, {sample({{0}, {0}, {0}}, 1), sample({{0}, {0}, {0}}, 1), sample({{0}, {0}, {0}}, 2)});
  EXPECT_EQ(baseline_constant(a).camera, CameraId(1));
  const Dataset u(c, {sample({{0}, {0}, {0}}, 2), sample({{0}, {0}, {0}}, 1), sample({{0}, {0}, {0}}, 0)});
  EXPECT_EQ(baseline_constant(u).camera, CameraId(0));
  EXPECT_THROW(baseline_constant(Dataset(c, {})), Error);
}

TEST(SwitchStats, Segments) {
  const std::vector<std::vector<CameraId>> streams{
      {CameraId(0), CameraId(0), CameraId(1)}, {CameraId(2), CameraId(2), CameraId(2), CameraId(2)}};
  const auto s = switch_stats(streams);
  EXPECT_EQ(s.segments, 3u);
  EXPECT_EQ(s.min_length, 1u);
  EXPECT_NEAR(s.mean_length, 7.0 / 3.0, 1e-12);
}

TEST(ImputationProbe, MeetsThresholdShape) {
  SynthConfig sc;
  sc.n_samples = 1000;
  sc.p_miss = 0.0;
  const auto d = generate(sc, 1).truth;
  SurvivalConfig c;
  c.seed = 2;
  const auto r = imputation_probe(d, c, 0.2, 1);
  EXPECT_EQ(r.errors.size(), 200u * 2u * sc.F);
  EXPECT_GE(r.fraction_at(0.2), 0.75);
  EXPECT_THROW(imputation_probe(d, c, 1.0, 1), Error);
}
