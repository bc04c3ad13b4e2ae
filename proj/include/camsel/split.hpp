#pragma once

// Exhaustive threshold search minimizing the weighted child cross-entropy
// of class labels. Shared by the classification and survival forests.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "camsel/rng.hpp"

namespace camsel::detail {

/// n * ln(n), tabulated up to a fixed count.
class XLogX {
 public:
  explicit XLogX(std::size_t n_max) : table_(n_max + 1, 0.0) {
    for (std::size_t i = 2; i <= n_max; ++i) {
      table_[i] = static_cast<double>(i) * std::log(static_cast<double>(i));
    }
  }
  double operator()(std::size_t n) const {
    if (n < table_.size()) return table_[n];
    return static_cast<double>(n) * std::log(static_cast<double>(n));
  }

 private:
  std::vector<double> table_;
};

struct ValueLabel {
  double value;
  std::uint32_t label;
  std::uint32_t sample;
};

inline bool value_order(const ValueLabel& a, const ValueLabel& b) {
  if (a.value != b.value) return a.value < b.value;
  return a.sample < b.sample;
}

/// Node count times the entropy (nats) of the class histogram.
inline double scaled_entropy(std::span<const std::uint32_t> counts,
                             std::size_t total, const XLogX& xlogx) {
  double s = xlogx(total);
  for (std::uint32_t c : counts) s -= xlogx(c);
  return s;
}

struct Split {
  std::size_t dim = 0;
  double threshold = 0.0;
  /// n_left * H(left) + n_right * H(right); divide by n for the weighted mean.
  double cost = std::numeric_limits<double>::infinity();
  std::size_t n_left = 0;
  std::size_t n_right = 0;

  bool valid() const { return std::isfinite(cost); }
  std::size_t imbalance() const {
    return n_left > n_right ? n_left - n_right : n_right - n_left;
  }
};

inline constexpr double kCostTieTolerance = 1e-9;

/// Strictly lower cost wins; within tolerance the more balanced split wins;
/// otherwise the incumbent stays, so scan order decides remaining ties.
inline bool better_split(const Split& cand, const Split& best) {
  if (!best.valid()) return cand.valid();
  if (cand.cost < best.cost - kCostTieTolerance) return true;
  if (cand.cost > best.cost + kCostTieTolerance) return false;
  return cand.imbalance() < best.imbalance();
}

/// Midpoint between consecutive distinct values, kept strictly below `hi`.
inline double midpoint(double lo, double hi) {
  const double m = lo + (hi - lo) * 0.5;
  return (m < hi && m >= lo) ? m : lo;
}

/// Scans every midpoint of `sorted` (ascending by value). Candidates leaving
/// fewer than `min_leaf` entries on either side are skipped. Updates `best`.
inline void scan_sorted(std::span<const ValueLabel> sorted, std::size_t classes,
                        std::size_t min_leaf, std::size_t dim,
                        const XLogX& xlogx, Split& best,
                        std::vector<std::uint32_t>& left,
                        std::vector<std::uint32_t>& right) {
  const std::size_t n = sorted.size();
  if (n < 2) return;
  left.assign(classes, 0);
  right.assign(classes, 0);
  for (const auto& e : sorted) ++right[e.label];
  const std::size_t lo_keep = std::max<std::size_t>(min_leaf, 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    ++left[sorted[i].label];
    --right[sorted[i].label];
    const std::size_t nl = i + 1;
    const std::size_t nr = n - nl;
    if (sorted[i].value == sorted[i + 1].value) continue;
    if (nl < lo_keep || nr < lo_keep) continue;
    Split cand;
    cand.dim = dim;
    cand.threshold = midpoint(sorted[i].value, sorted[i + 1].value);
    cand.cost = scaled_entropy(left, nl, xlogx) + scaled_entropy(right, nr, xlogx);
    cand.n_left = nl;
    cand.n_right = nr;
    if (better_split(cand, best)) best = cand;
  }
}

/// Draws `k` distinct indices from [0, n) (partial Fisher-Yates), in draw order.
template <class Rng>
std::vector<std::size_t> sample_dims(std::size_t n, std::size_t k, Rng& rng,
                                     std::vector<std::size_t>& scratch) {
  scratch.resize(n);
  for (std::size_t i = 0; i < n; ++i) scratch[i] = i;
  k = std::min(k, n);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(uniform_index(rng, n - i));
    std::swap(scratch[i], scratch[j]);
  }
  return {scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k)};
}

inline std::size_t default_mtry(std::size_t dims) {
  return std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(dims)))));
}

}  // namespace camsel::detail
