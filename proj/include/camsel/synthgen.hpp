#pragma once

// Synthetic multi-view data with a shared latent state and MNAR masking.
//
// Per frame, a shared latent z ~ N(0, I) and per-camera private latents u_k
// combine as z_k = rho * z + sqrt(1 - rho^2) * u_k, so rho sets the cross-view
// correlation. Camera k renders block W_k z_k + sigma * noise. The label is
// the camera with the largest salience <s_k, z_k> + bias_k. Masking hides
// every unselected block of a frame with probability p_miss.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "camsel/core_model.hpp"
#include "camsel/parallel.hpp"
#include "camsel/rng.hpp"
#include "json.hpp"

namespace camsel {

struct SynthConfig {
  std::size_t K = 3;
  std::size_t F = 8;
  std::size_t n_samples = 2000;
  std::size_t n_sequences = 10;
  std::size_t latent_dim = 4;
  double view_correlation = 0.9;
  double noise_sigma = 0.05;
  double p_miss = 0.5;
  /// AR(1) coefficient of the latent within a sequence; 0 gives i.i.d. frames.
  double temporal_corr = 0.0;
  /// Additive salience offset per camera; empty means all zero.
  std::vector<double> camera_bias;
  std::string game_id = "synth";
  std::uint64_t seed = 7;
  /// Seed of view maps and salience directions; defaults to a stream of `seed`.
  /// Datasets sharing it come from the same "stadium".
  std::optional<std::uint64_t> map_seed;

  void validate() const {
    if (K < 2) throw Error("synth config: K must be >= 2");
    if (F == 0) throw Error("synth config: F must be >= 1");
    if (latent_dim == 0) throw Error("synth config: latent_dim must be >= 1");
    if (n_sequences == 0) throw Error("synth config: n_sequences must be >= 1");
    if (!(noise_sigma >= 0.0)) throw Error("synth config: noise_sigma must be >= 0");
    if (!(p_miss >= 0.0 && p_miss <= 1.0)) throw Error("synth config: p_miss must be in [0, 1]");
    if (!(view_correlation >= 0.0 && view_correlation <= 1.0)) {
      throw Error("synth config: view_correlation must be in [0, 1]");
    }
    if (!(temporal_corr >= 0.0 && temporal_corr < 1.0)) {
      throw Error("synth config: temporal_corr must be in [0, 1)");
    }
    if (!camera_bias.empty() && camera_bias.size() != K) {
      throw Error("synth config: camera_bias must have K entries");
    }
  }

  std::uint64_t resolved_map_seed() const {
    return map_seed ? *map_seed : derive_seed(seed, "view-maps");
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["K"] = K;
    j["F"] = F;
    j["n_samples"] = n_samples;
    j["n_sequences"] = n_sequences;
    j["latent_dim"] = latent_dim;
    j["view_correlation"] = view_correlation;
    j["noise_sigma"] = noise_sigma;
    j["p_miss"] = p_miss;
    j["temporal_corr"] = temporal_corr;
    j["camera_bias"] = camera_bias;
    j["game_id"] = game_id;
    j["seed"] = seed;
    if (map_seed) j["map_seed"] = *map_seed;
    return j;
  }

  static SynthConfig from_json(const nlohmann::json& j) {
    SynthConfig c;
    c.K = j.value("K", c.K);
    c.F = j.value("F", c.F);
    c.n_samples = j.value("n_samples", c.n_samples);
    c.n_sequences = j.value("n_sequences", c.n_sequences);
    c.latent_dim = j.value("latent_dim", c.latent_dim);
    c.view_correlation = j.value("view_correlation", c.view_correlation);
    c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
    c.p_miss = j.value("p_miss", c.p_miss);
    c.temporal_corr = j.value("temporal_corr", c.temporal_corr);
    c.camera_bias = j.value("camera_bias", c.camera_bias);
    c.game_id = j.value("game_id", c.game_id);
    c.seed = j.value("seed", c.seed);
    if (j.contains("map_seed") && !j.at("map_seed").is_null()) {
      c.map_seed = j.at("map_seed").get<std::uint64_t>();
    }
    c.validate();
    return c;
  }
};

/// Linear rendering of each camera: block = maps[k] * z_k, salience = <dirs[k], z_k>.
struct ViewModel {
  std::size_t K = 0, F = 0, L = 0;
  std::vector<std::vector<double>> maps;  // K x (F * L), row-major
  std::vector<std::vector<double>> salience_dirs;  // K x L, unit norm

  static ViewModel draw(std::size_t K, std::size_t F, std::size_t L, std::uint64_t seed) {
    ViewModel m{K, F, L, {}, {}};
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double scale = 1.0 / std::sqrt(static_cast<double>(L));
    for (std::size_t k = 0; k < K; ++k) {
      std::vector<double> w(F * L);
      for (double& v : w) v = normal(rng) * scale;
      m.maps.push_back(std::move(w));
    }
    for (std::size_t k = 0; k < K; ++k) {
      std::vector<double> s(L);
      double norm = 0.0;
      for (double& v : s) {
        v = normal(rng);
        norm += v * v;
      }
      norm = std::sqrt(norm);
      for (double& v : s) v /= norm;
      m.salience_dirs.push_back(std::move(s));
    }
    return m;
  }
};

struct SynthData {
  Dataset visible;
  Dataset truth;
  ViewModel model;
};

/// Deterministic in `config`; sequences are generated from independent
/// derived streams, so `threads` does not affect the output.
inline SynthData generate(const SynthConfig& config, unsigned threads = 0) {
  config.validate();
  const std::size_t K = config.K, F = config.F, L = config.latent_dim;
  const ViewModel model = ViewModel::draw(K, F, L, config.resolved_map_seed());
  const double rho = config.view_correlation;
  const double private_scale = std::sqrt(std::max(0.0, 1.0 - rho * rho));
  const double a = config.temporal_corr;
  const double innovation = std::sqrt(1.0 - a * a);

  const std::size_t S = config.n_sequences;
  std::vector<std::vector<MultiViewSample>> truth_seq(S), visible_seq(S);
  parallel_for(S, threads, [&](std::size_t seq) {
    const std::size_t begin = config.n_samples * seq / S;
    const std::size_t end = config.n_samples * (seq + 1) / S;
    Rng rng(derive_seed(config.seed, "sequence-" + std::to_string(seq)));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> shared(L), priv(K * L), zk(L);
    for (std::size_t i = begin; i < end; ++i) {
      const bool first = i == begin;
      for (double& v : shared) v = first ? normal(rng) : a * v + innovation * normal(rng);
      for (double& v : priv) v = first ? normal(rng) : a * v + innovation * normal(rng);

      MultiViewSample s;
      s.game_id = config.game_id;
      s.sequence_id = "seq" + std::to_string(seq);
      s.frame_index = static_cast<std::int64_t>(i - begin);
      std::size_t label = 0;
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t l = 0; l < L; ++l) {
          zk[l] = rho * shared[l] + private_scale * priv[k * L + l];
        }
        std::vector<double> block(F, 0.0);
        for (std::size_t f = 0; f < F; ++f) {
          double v = 0.0;
          for (std::size_t l = 0; l < L; ++l) v += model.maps[k][f * L + l] * zk[l];
          block[f] = v + config.noise_sigma * normal(rng);
        }
        double sal = config.camera_bias.empty() ? 0.0 : config.camera_bias[k];
        for (std::size_t l = 0; l < L; ++l) sal += model.salience_dirs[k][l] * zk[l];
        if (sal > best) {
          best = sal;
          label = k;
        }
        s.blocks.push_back(FeatureBlock::observed(std::move(block)));
      }
      s.label = CameraId(static_cast<std::uint32_t>(label));
      const bool hide = uniform01(rng) < config.p_miss;
      MultiViewSample vis = s;
      if (hide) {
        for (std::size_t k = 0; k < K; ++k) {
          if (k != label) vis.blocks[k] = FeatureBlock::missing();
        }
      }
      truth_seq[seq].push_back(std::move(s));
      visible_seq[seq].push_back(std::move(vis));
    }
  });

  std::vector<MultiViewSample> truth, visible;
  for (std::size_t seq = 0; seq < S; ++seq) {
    for (auto& s : truth_seq[seq]) truth.push_back(std::move(s));
    for (auto& s : visible_seq[seq]) visible.push_back(std::move(s));
  }
  DatasetConfig dc;
  dc.K = K;
  dc.F = F;
  return SynthData{Dataset(dc, std::move(visible)), Dataset(dc, std::move(truth)), model};
}

}  // namespace camsel
