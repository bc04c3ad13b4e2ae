#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "camsel/core_model.hpp"

namespace camsel::testing {

inline MultiViewSample sample(std::vector<std::vector<double>> blocks, std::uint32_t label,
                              std::string seq = "s0", std::int64_t frame = 0) {
  MultiViewSample s;
  s.game_id = "g";
  s.sequence_id = std::move(seq);
  s.frame_index = frame;
  for (auto& b : blocks) {
    s.blocks.push_back(b.empty() ? FeatureBlock::missing() : FeatureBlock::observed(std::move(b)));
  }
  s.label = CameraId(label);
  return s;
}

inline DatasetConfig config(std::size_t K, std::size_t F) {
  DatasetConfig c;
  c.K = K;
  c.F = F;
  return c;
}

/// Per-test scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name) {
    path_ = std::filesystem::temp_directory_path() /
            ("camsel_" + name + "_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace camsel::testing
