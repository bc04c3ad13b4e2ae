#pragma once

// Spatial-appearance heatmap: detection boxes deposit their appearance
// vectors onto a coarse image grid, five points per box, with bilinear
// weights relative to the four surrounding cell centers.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "camsel/core_model.hpp"

namespace camsel {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct DetectionBox {
  double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;
  std::vector<double> appearance;
};

struct GridGeometry {
  std::size_t cells_x = 16;
  std::size_t cells_y = 9;
  double image_w = 1280.0;
  double image_h = 720.0;

  std::size_t cells() const { return cells_x * cells_y; }
  double pitch_x() const { return image_w / static_cast<double>(cells_x); }
  double pitch_y() const { return image_h / static_cast<double>(cells_y); }
  Point cell_center(std::size_t ix, std::size_t iy) const {
    return {(static_cast<double>(ix) + 0.5) * pitch_x(),
            (static_cast<double>(iy) + 0.5) * pitch_y()};
  }

  void validate() const {
    if (cells_x == 0 || cells_y == 0 || !(image_w > 0) || !(image_h > 0)) {
      throw Error("grid geometry: cell counts and image size must be positive");
    }
  }
};

struct CellWeight {
  std::size_t cell = 0;  // row-major: iy * cells_x + ix
  double weight = 0.0;
};

/// At most four nonzero (cell, weight) pairs.
struct PointWeights {
  std::array<CellWeight, 4> entries{};
  std::size_t count = 0;

  const CellWeight* begin() const { return entries.data(); }
  const CellWeight* end() const { return entries.data() + count; }
  std::size_t size() const { return count; }
  double total() const {
    double s = 0.0;
    for (const auto& e : *this) s += e.weight;
    return s;
  }
};

/// Four corners then the center.
inline std::array<Point, 5> box_points(const DetectionBox& b) {
  if (!(b.x1 < b.x2) || !(b.y1 < b.y2)) {
    throw Error("degenerate detection box: require x1 < x2 and y1 < y2");
  }
  return {{{b.x1, b.y1},
           {b.x2, b.y1},
           {b.x1, b.y2},
           {b.x2, b.y2},
           {0.5 * (b.x1 + b.x2), 0.5 * (b.y1 + b.y2)}}};
}

namespace detail {

// Lattice coordinate of p along one axis: index of the lower cell center
// and the fractional offset toward the next one, clamped to the hull of
// cell centers.
inline std::pair<std::size_t, double> lattice_coord(double p, double pitch,
                                                    std::size_t cells) {
  double u = p / pitch - 0.5;
  const double hi = static_cast<double>(cells - 1);
  u = std::clamp(u, 0.0, hi);
  if (cells == 1) {
    return {0, 0.0};
  }
  auto i0 = static_cast<std::size_t>(std::floor(u));
  if (i0 >= cells - 1) {
    i0 = cells - 2;
  }
  return {i0, u - static_cast<double>(i0)};
}

}  // namespace detail

inline PointWeights point_weights(Point p, const GridGeometry& g) {
  if (!(p.x >= 0.0 && p.x <= g.image_w && p.y >= 0.0 && p.y <= g.image_h)) {
    throw Error("point (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                ") outside image");
  }
  const auto [ix, fx] = detail::lattice_coord(p.x, g.pitch_x(), g.cells_x);
  const auto [iy, fy] = detail::lattice_coord(p.y, g.pitch_y(), g.cells_y);

  PointWeights out;
  const double wx[2] = {1.0 - fx, fx};
  const double wy[2] = {1.0 - fy, fy};
  for (std::size_t dy = 0; dy < 2; ++dy) {
    for (std::size_t dx = 0; dx < 2; ++dx) {
      const double w = wx[dx] * wy[dy];
      if (w <= 0.0) {
        continue;
      }
      out.entries[out.count++] = {(iy + dy) * g.cells_x + (ix + dx), w};
    }
  }
  return out;
}

class Heatmap {
 public:
  Heatmap() = default;
  Heatmap(const GridGeometry& g, std::size_t appearance_dim)
      : geometry_(g), dim_(appearance_dim), data_(g.cells() * appearance_dim, 0.0) {}

  const GridGeometry& geometry() const { return geometry_; }
  std::size_t appearance_dim() const { return dim_; }
  std::size_t cells() const { return geometry_.cells(); }

  std::span<double> cell(std::size_t c) { return {data_.data() + c * dim_, dim_}; }
  std::span<const double> cell(std::size_t c) const {
    return {data_.data() + c * dim_, dim_};
  }
  std::span<const double> cell(std::size_t ix, std::size_t iy) const {
    return cell(iy * geometry_.cells_x + ix);
  }
  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  /// Sum over all cells of one appearance component.
  double mass(std::size_t component) const {
    double s = 0.0;
    for (std::size_t c = 0; c < cells(); ++c) s += cell(c)[component];
    return s;
  }

  Heatmap& operator+=(const Heatmap& o) {
    if (o.dim_ != dim_ || o.cells() != cells()) {
      throw Error("heatmap shape mismatch");
    }
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  friend Heatmap operator+(Heatmap a, const Heatmap& b) { return a += b; }
  friend bool operator==(const Heatmap& a, const Heatmap& b) {
    return a.dim_ == b.dim_ && a.geometry_.cells_x == b.geometry_.cells_x &&
           a.geometry_.cells_y == b.geometry_.cells_y && a.data_ == b.data_;
  }

 private:
  GridGeometry geometry_;
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

enum class PointHeat {
  sum,      // each of the five points deposits weight * appearance
  average,  // each point deposits weight * appearance / 5
};

enum class Summation {
  floating,
  // Contributions are rounded to multiples of 2^-32 and accumulated as
  // integers, so results do not depend on box order or grouping.
  exact,
};

struct HeatmapOptions {
  PointHeat heat = PointHeat::sum;
  Summation summation = Summation::floating;
};

inline Heatmap build_heatmap(std::span<const DetectionBox> boxes,
                             const GridGeometry& g, std::size_t appearance_dim,
                             const HeatmapOptions& opts = {}) {
  g.validate();
  Heatmap h(g, appearance_dim);
  const double scale = opts.heat == PointHeat::average ? 0.2 : 1.0;
  constexpr double kQuantum = 0x1.0p32;
  constexpr double kLimit = 0x1.0p52;
  std::vector<std::int64_t> fixed;
  if (opts.summation == Summation::exact) {
    fixed.assign(h.data().size(), 0);
  }

  for (const auto& b : boxes) {
    if (b.appearance.size() != appearance_dim) {
      throw Error("appearance vector has " + std::to_string(b.appearance.size()) +
                  " components, expected " + std::to_string(appearance_dim));
    }
    for (const Point& p : box_points(b)) {
      for (const CellWeight& cw : point_weights(p, g)) {
        const double w = cw.weight * scale;
        const std::size_t base = cw.cell * appearance_dim;
        for (std::size_t a = 0; a < appearance_dim; ++a) {
          const double v = w * b.appearance[a];
          if (opts.summation == Summation::exact) {
            const double q = std::nearbyint(v * kQuantum);
            if (std::abs(q) >= kLimit) {
              throw Error("exact summation: contribution out of range");
            }
            fixed[base + a] += static_cast<std::int64_t>(q);
            if (std::abs(static_cast<double>(fixed[base + a])) >= kLimit) {
              throw Error("exact summation: accumulator out of range");
            }
          } else {
            h.data()[base + a] += v;
          }
        }
      }
    }
  }
  if (opts.summation == Summation::exact) {
    for (std::size_t i = 0; i < fixed.size(); ++i) {
      h.data()[i] = static_cast<double>(fixed[i]) / kQuantum;
    }
  }
  return h;
}

enum class PoolMode { average, max, flatten, average_max };

inline std::vector<double> pool_heatmap(const Heatmap& h,
                                        PoolMode mode = PoolMode::average_max) {
  const std::size_t A = h.appearance_dim();
  const std::size_t N = h.cells();
  switch (mode) {
    case PoolMode::flatten:
      return h.data();
    case PoolMode::average: {
      std::vector<double> out(A, 0.0);
      for (std::size_t c = 0; c < N; ++c) {
        for (std::size_t a = 0; a < A; ++a) out[a] += h.cell(c)[a];
      }
      for (double& v : out) v /= static_cast<double>(N);
      return out;
    }
    case PoolMode::max: {
      std::vector<double> out(A, -std::numeric_limits<double>::infinity());
      for (std::size_t c = 0; c < N; ++c) {
        for (std::size_t a = 0; a < A; ++a) out[a] = std::max(out[a], h.cell(c)[a]);
      }
      return out;
    }
    case PoolMode::average_max: {
      auto out = pool_heatmap(h, PoolMode::average);
      auto mx = pool_heatmap(h, PoolMode::max);
      out.insert(out.end(), mx.begin(), mx.end());
      return out;
    }
  }
  return {};
}

inline PoolMode parse_pool_mode(const std::string& s) {
  if (s == "average" || s == "avg") return PoolMode::average;
  if (s == "max") return PoolMode::max;
  if (s == "flatten") return PoolMode::flatten;
  if (s == "average_max" || s == "avg+max") return PoolMode::average_max;
  throw Error("unknown pooling mode '" + s + "'");
}

/// y * D^2 + (1 - y) * max(margin - D, 0)^2, D the Euclidean distance.
inline double contrastive_loss(std::span<const double> xi,
                               std::span<const double> xj, int similar,
                               double margin = 1.0) {
  if (xi.size() != xj.size()) {
    throw Error("contrastive_loss: vectors differ in length");
  }
  if (!(margin > 0.0)) {
    throw Error("contrastive_loss: margin must be positive");
  }
  if (similar != 0 && similar != 1) {
    throw Error("contrastive_loss: label must be 0 or 1");
  }
  double sq = 0.0;
  for (std::size_t i = 0; i < xi.size(); ++i) {
    const double d = xi[i] - xj[i];
    sq += d * d;
  }
  if (similar == 1) {
    return sq;
  }
  const double hinge = std::max(margin - std::sqrt(sq), 0.0);
  return hinge * hinge;
}

}  // namespace camsel
