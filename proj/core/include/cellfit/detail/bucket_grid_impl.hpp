#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace cellfit::detail {

template <class DistFn>
std::pair<double, std::size_t> BucketGrid::nearest(Vec2 p, DistFn&& dist) const {
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_item = std::numeric_limits<std::size_t>::max();

  const long ci = static_cast<long>(std::floor((p.x - origin_.x) / cell_));
  const long cj = static_cast<long>(std::floor((p.y - origin_.y) / cell_));

  auto visit = [&](long i, long j) {
    const std::size_t c = static_cast<std::size_t>(j * nx_ + i);
    for (std::size_t k = offsets_[c]; k < offsets_[c + 1]; ++k) {
      const std::size_t item = items_[k];
      const double d = dist(item);
      if (d < best || (d == best && item < best_item)) {
        best = d;
        best_item = item;
      }
    }
  };

  // Rings closer than the grid itself are empty.
  const long r_start = std::max({0L, -ci, ci - (nx_ - 1), -cj, cj - (ny_ - 1)});
  const long r_last = std::max({ci, nx_ - 1 - ci, cj, ny_ - 1 - cj});

  for (long r = r_start; r <= r_last; ++r) {
    const long i_lo = std::max(ci - r, 0L);
    const long i_hi = std::min(ci + r, nx_ - 1);
    for (long j : {cj - r, cj + r}) {
      if (j < 0 || j >= ny_) continue;
      for (long i = i_lo; i <= i_hi; ++i) visit(i, j);
      if (r == 0) break;
    }
    if (r > 0) {
      const long j_lo = std::max(cj - r + 1, 0L);
      const long j_hi = std::min(cj + r - 1, ny_ - 1);
      for (long i : {ci - r, ci + r}) {
        if (i < 0 || i >= nx_) continue;
        for (long j = j_lo; j <= j_hi; ++j) visit(i, j);
      }
    }
    // Every cell outside ring r is at least r cells away from p.
    if (best < static_cast<double>(r) * cell_) break;
  }
  return {best, best_item};
}

}  // namespace cellfit::detail
