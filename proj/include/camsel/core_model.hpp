#pragma once

// Multi-view feature records with block-granular missing data, the dataset
// container, and JSON-lines (de)serialization.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace camsel {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

struct CameraId {
  std::uint32_t index = 0;

  constexpr CameraId() = default;
  constexpr explicit CameraId(std::uint32_t i) : index(i) {}
  friend constexpr auto operator<=>(CameraId, CameraId) = default;
};

struct FeatureBlock {
  /// Empty when the view is missing.
  std::vector<double> values;
  bool present = false;

  static FeatureBlock observed(std::vector<double> v) {
    return FeatureBlock{std::move(v), true};
  }
  static FeatureBlock missing() { return FeatureBlock{}; }
};

struct MultiViewSample {
  std::string game_id;
  std::string sequence_id;
  std::int64_t frame_index = 0;
  std::vector<FeatureBlock> blocks;
  /// Absent only for unlabeled inference frames.
  std::optional<CameraId> label;

  bool is_complete() const {
    return std::all_of(blocks.begin(), blocks.end(),
                       [](const FeatureBlock& b) { return b.present; });
  }
};

struct DimRange {
  double min = std::numeric_limits<double>::infinity();
  double max = -std::numeric_limits<double>::infinity();

  bool empty() const { return min > max; }
  double width() const { return max - min; }
  void include(double v) {
    min = std::min(min, v);
    max = std::max(max, v);
  }
};

/// Sidecar schema: camera count, per-camera feature width, display names.
struct DatasetConfig {
  std::size_t K = 3;
  std::size_t F = 32;
  std::vector<std::string> camera_names;

  std::string camera_name(std::size_t k) const {
    if (k < camera_names.size()) {
      return camera_names[k];
    }
    if (K == 3) {
      static const char* const roles[] = {"left", "middle", "right"};
      return roles[k];
    }
    return "cam" + std::to_string(k);
  }

  void validate() const {
    if (K == 0 || F == 0) {
      throw Error("dataset config: K and F must be positive");
    }
    if (!camera_names.empty()) {
      if (camera_names.size() != K) {
        throw Error("dataset config: camera_names must have K entries");
      }
      for (std::size_t i = 0; i < K; ++i) {
        for (std::size_t j = i + 1; j < K; ++j) {
          if (camera_names[i] == camera_names[j]) {
            throw Error("dataset config: duplicate camera name '" +
                        camera_names[i] + "'");
          }
        }
      }
    }
  }

  static DatasetConfig from_json(const nlohmann::json& j) {
    DatasetConfig c;
    c.K = j.at("K").get<std::size_t>();
    c.F = j.at("F").get<std::size_t>();
    if (j.contains("camera_names")) {
      c.camera_names = j.at("camera_names").get<std::vector<std::string>>();
    }
    c.validate();
    return c;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["K"] = K;
    j["F"] = F;
    std::vector<std::string> names;
    for (std::size_t k = 0; k < K; ++k) {
      names.push_back(camera_name(k));
    }
    j["camera_names"] = names;
    return j;
  }
};

/// Immutable ordered collection of samples sharing K and F. Ranges cover
/// observed values only; a dimension with no observation has an empty range.
class Dataset {
 public:
  Dataset() = default;

  Dataset(DatasetConfig config, std::vector<MultiViewSample> samples)
      : config_(std::move(config)), samples_(std::move(samples)) {
    config_.validate();
    ranges_.assign(config_.K * config_.F, DimRange{});
    for (std::size_t i = 0; i < samples_.size(); ++i) {
      const auto& s = samples_[i];
      if (s.blocks.size() != config_.K) {
        throw Error("sample " + std::to_string(i) + ": expected " +
                    std::to_string(config_.K) + " blocks, got " +
                    std::to_string(s.blocks.size()));
      }
      if (s.label && s.label->index >= config_.K) {
        throw Error("sample " + std::to_string(i) + ": label out of range");
      }
      for (std::size_t k = 0; k < config_.K; ++k) {
        const auto& b = s.blocks[k];
        if (!b.present) {
          continue;
        }
        if (b.values.size() != config_.F) {
          throw Error("sample " + std::to_string(i) + ": block " +
                      std::to_string(k) + " has " +
                      std::to_string(b.values.size()) + " values, expected " +
                      std::to_string(config_.F));
        }
        for (std::size_t f = 0; f < config_.F; ++f) {
          const double v = b.values[f];
          if (!std::isfinite(v)) {
            throw Error("sample " + std::to_string(i) +
                        ": non-finite feature value");
          }
          ranges_[k * config_.F + f].include(v);
        }
      }
    }
  }

  const DatasetConfig& config() const { return config_; }
  std::size_t K() const { return config_.K; }
  std::size_t F() const { return config_.F; }
  std::size_t dims() const { return config_.K * config_.F; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }

  const std::vector<MultiViewSample>& samples() const { return samples_; }
  const MultiViewSample& operator[](std::size_t i) const { return samples_[i]; }
  const std::vector<DimRange>& dim_ranges() const { return ranges_; }

  Dataset subset(std::span<const std::size_t> ids) const {
    std::vector<MultiViewSample> out;
    out.reserve(ids.size());
    for (std::size_t id : ids) {
      out.push_back(samples_.at(id));
    }
    return Dataset(config_, std::move(out));
  }

  Dataset with_config(DatasetConfig c) const { return Dataset(std::move(c), samples_); }

  /// First dimension without any observed value, if any.
  std::optional<std::size_t> first_unobserved_dim() const {
    for (std::size_t d = 0; d < ranges_.size(); ++d) {
      if (ranges_[d].empty()) {
        return d;
      }
    }
    return std::nullopt;
  }

 private:
  DatasetConfig config_;
  std::vector<MultiViewSample> samples_;
  std::vector<DimRange> ranges_;
};

inline Dataset concat(const Dataset& a, const Dataset& b) {
  if (a.K() != b.K() || a.F() != b.F()) {
    throw Error("concat: datasets differ in K or F");
  }
  std::vector<MultiViewSample> all = a.samples();
  all.insert(all.end(), b.samples().begin(), b.samples().end());
  return Dataset(a.config(), std::move(all));
}

inline std::pair<Dataset, Dataset> split_complete_incomplete(const Dataset& d) {
  std::vector<MultiViewSample> complete, incomplete;
  for (const auto& s : d.samples()) {
    (s.is_complete() ? complete : incomplete).push_back(s);
  }
  return {Dataset(d.config(), std::move(complete)),
          Dataset(d.config(), std::move(incomplete))};
}

/// Camera-major concatenation of the K blocks. Missing entries are NaN and
/// flagged false in the mask.
inline std::pair<std::vector<double>, std::vector<bool>> flatten(
    const MultiViewSample& s, std::size_t F) {
  std::vector<double> values(s.blocks.size() * F,
                             std::numeric_limits<double>::quiet_NaN());
  std::vector<bool> mask(values.size(), false);
  for (std::size_t k = 0; k < s.blocks.size(); ++k) {
    const auto& b = s.blocks[k];
    if (!b.present) {
      continue;
    }
    for (std::size_t f = 0; f < F; ++f) {
      values[k * F + f] = b.values[f];
      mask[k * F + f] = true;
    }
  }
  return {std::move(values), std::move(mask)};
}

/// Dense row-major view of a dataset for the tree learners.
struct FeatureTable {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t classes = 0;
  std::vector<double> values;
  std::vector<std::uint8_t> observed;
  std::vector<std::uint32_t> labels;

  std::span<const double> row(std::size_t i) const {
    return {values.data() + i * cols, cols};
  }
  double at(std::size_t i, std::size_t d) const { return values[i * cols + d]; }
  bool is_observed(std::size_t i, std::size_t d) const {
    return observed[i * cols + d] != 0;
  }
  bool fully_observed() const {
    return std::all_of(observed.begin(), observed.end(),
                       [](std::uint8_t o) { return o != 0; });
  }

  static FeatureTable from_dataset(const Dataset& d, bool require_labels = true) {
    FeatureTable t;
    t.rows = d.size();
    t.cols = d.dims();
    t.classes = d.K();
    t.values.assign(t.rows * t.cols, std::numeric_limits<double>::quiet_NaN());
    t.observed.assign(t.rows * t.cols, 0);
    t.labels.assign(t.rows, 0);
    for (std::size_t i = 0; i < t.rows; ++i) {
      const auto& s = d[i];
      if (s.label) {
        t.labels[i] = s.label->index;
      } else if (require_labels) {
        throw Error("sample " + std::to_string(i) + " has no label");
      }
      for (std::size_t k = 0; k < d.K(); ++k) {
        if (!s.blocks[k].present) {
          continue;
        }
        for (std::size_t f = 0; f < d.F(); ++f) {
          t.values[i * t.cols + k * d.F() + f] = s.blocks[k].values[f];
          t.observed[i * t.cols + k * d.F() + f] = 1;
        }
      }
    }
    return t;
  }
};

// ---------------------------------------------------------------------------
// JSON-lines I/O

inline nlohmann::ordered_json sample_to_json(const MultiViewSample& s) {
  nlohmann::ordered_json j;
  j["game_id"] = s.game_id;
  j["sequence_id"] = s.sequence_id;
  j["frame"] = s.frame_index;
  if (s.label) {
    j["label"] = s.label->index;
  }
  auto blocks = nlohmann::ordered_json::array();
  for (const auto& b : s.blocks) {
    if (b.present) {
      blocks.push_back(b.values);
    } else {
      blocks.push_back(nullptr);
    }
  }
  j["blocks"] = std::move(blocks);
  return j;
}

struct LoadOptions {
  /// Overrides inference of K and F from the first record.
  std::optional<DatasetConfig> schema;
  bool require_label = true;
  /// Reject files where some dimension is never observed.
  bool require_all_dims_observed = true;
};

inline MultiViewSample parse_sample(const nlohmann::json& j, std::size_t line,
                                    std::size_t K, std::size_t F,
                                    bool require_label) {
  if (!j.is_object()) {
    throw ParseError(line, "record is not a JSON object");
  }
  MultiViewSample s;
  try {
    s.game_id = j.value("game_id", std::string{});
    s.sequence_id = j.value("sequence_id", std::string{});
    s.frame_index = j.at("frame").get<std::int64_t>();
    if (j.contains("label") && !j.at("label").is_null()) {
      const auto lab = j.at("label").get<std::int64_t>();
      if (lab < 0 || static_cast<std::size_t>(lab) >= K) {
        throw ParseError(line, "label " + std::to_string(lab) +
                                   " outside [0, " + std::to_string(K) + ")");
      }
      s.label = CameraId(static_cast<std::uint32_t>(lab));
    } else if (require_label) {
      throw ParseError(line, "missing label");
    }
    const auto& blocks = j.at("blocks");
    if (!blocks.is_array() || blocks.size() != K) {
      throw ParseError(line, "expected " + std::to_string(K) + " blocks, got " +
                                 std::to_string(blocks.is_array() ? blocks.size() : 0));
    }
    for (std::size_t k = 0; k < K; ++k) {
      const auto& b = blocks[k];
      if (b.is_null()) {
        s.blocks.push_back(FeatureBlock::missing());
        continue;
      }
      if (!b.is_array() || b.size() != F) {
        throw ParseError(line, "block " + std::to_string(k) + " must have " +
                                   std::to_string(F) + " values");
      }
      std::vector<double> v;
      v.reserve(F);
      for (const auto& x : b) {
        if (!x.is_number()) {
          throw ParseError(line, "non-numeric feature value");
        }
        v.push_back(x.get<double>());
        if (!std::isfinite(v.back())) {
          throw ParseError(line, "non-finite feature value");
        }
      }
      s.blocks.push_back(FeatureBlock::observed(std::move(v)));
    }
  } catch (const ParseError&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(line, e.what());
  }
  if (s.label && !s.blocks[s.label->index].present) {
    throw ParseError(line, "labeled camera block is missing");
  }
  return s;
}

inline Dataset read_dataset(std::istream& in, const LoadOptions& opts = {}) {
  std::optional<DatasetConfig> config = opts.schema;
  std::vector<MultiViewSample> samples;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line, std::string("malformed JSON: ") + e.what());
    }
    if (!config) {
      DatasetConfig c;
      const auto& blocks = j.contains("blocks") ? j["blocks"] : nlohmann::json();
      if (!blocks.is_array() || blocks.empty()) {
        throw ParseError(line, "cannot infer K from record");
      }
      c.K = blocks.size();
      c.F = 0;
      for (const auto& b : blocks) {
        if (b.is_array()) {
          c.F = b.size();
          break;
        }
      }
      if (c.F == 0) {
        throw ParseError(line, "cannot infer F from record");
      }
      config = c;
    }
    samples.push_back(
        parse_sample(j, line, config->K, config->F, opts.require_label));
  }
  if (samples.empty()) {
    throw Error("no records");
  }
  Dataset d(*config, std::move(samples));
  if (opts.require_all_dims_observed) {
    if (auto dim = d.first_unobserved_dim()) {
      throw Error("dimension " + std::to_string(*dim) + " (camera " +
                  std::to_string(*dim / d.F()) + ", feature " +
                  std::to_string(*dim % d.F()) + ") has no observed value");
    }
  }
  return d;
}

inline Dataset load_dataset(const std::string& path, const LoadOptions& opts = {}) {
  std::ifstream in(path);
  if (!in) {
    throw Error("cannot open dataset '" + path + "'");
  }
  return read_dataset(in, opts);
}

inline DatasetConfig load_dataset_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error("cannot open dataset config '" + path + "'");
  }
  try {
    return DatasetConfig::from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error("dataset config '" + path + "': " + e.what());
  }
}

inline void write_dataset(std::ostream& out, const Dataset& d) {
  for (const auto& s : d.samples()) {
    out << sample_to_json(s).dump() << '\n';
  }
}

inline void save_dataset(const std::string& path, const Dataset& d) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error("cannot write '" + path + "'");
  }
  write_dataset(out, d);
}

}  // namespace camsel
