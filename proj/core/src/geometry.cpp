#include "cellfit/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "cellfit/errors.hpp"

namespace cellfit {

namespace {

constexpr double kDegenerateEdge = 1e-14;

bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  auto orient = [](Vec2 p, Vec2 q, Vec2 r) {
    const double v = cross(q - p, r - p);
    return (v > 0.0) - (v < 0.0);
  };
  auto on_segment = [](Vec2 p, Vec2 q, Vec2 r) {
    return std::min(p.x, q.x) <= r.x && r.x <= std::max(p.x, q.x) &&
           std::min(p.y, q.y) <= r.y && r.y <= std::max(p.y, q.y);
  };
  const int o1 = orient(a, b, c);
  const int o2 = orient(a, b, d);
  const int o3 = orient(c, d, a);
  const int o4 = orient(c, d, b);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(a, b, c)) return true;
  if (o2 == 0 && on_segment(a, b, d)) return true;
  if (o3 == 0 && on_segment(c, d, a)) return true;
  if (o4 == 0 && on_segment(c, d, b)) return true;
  return false;
}

}  // namespace

Curve::Curve(std::vector<Vec2> vertices, CurveCheck check) : vertices_(std::move(vertices)) {
  const std::size_t n = vertices_.size();
  if (n < 3) {
    throw InvalidInput("curve needs at least 3 vertices, got " + std::to_string(n));
  }
  for (const Vec2& v : vertices_) {
    if (!std::isfinite(v.x) || !std::isfinite(v.y)) {
      throw InvalidInput("curve has a non-finite vertex");
    }
  }
  const double scale = diameter(vertices_);
  for (std::size_t i = 0; i < n; ++i) {
    if (distance(vertices_[i], vertices_[(i + 1) % n]) <= kDegenerateEdge * scale) {
      throw InvalidInput("curve edge " + std::to_string(i) + " is degenerate");
    }
  }
  if (!(signed_area(vertices_) > 0.0)) {
    throw InvalidInput("curve must be counter-clockwise with positive area");
  }
  if (check == CurveCheck::full && !is_simple(vertices_)) {
    throw InvalidInput("curve is self-intersecting");
  }
}

VertexField::VertexField(std::vector<std::vector<double>> species) : species_(std::move(species)) {
  for (const auto& s : species_) {
    if (s.size() != species_.front().size()) {
      throw InvalidInput("all species of a vertex field must have the same length");
    }
  }
}

VertexField::VertexField(std::size_t n_species, std::size_t n_vertices, double value)
    : species_(n_species, std::vector<double>(n_vertices, value)) {}

double signed_area(PointSpan polygon) {
  const std::size_t n = polygon.size();
  double twice = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    twice += cross(polygon[i], polygon[(i + 1) % n]);
  }
  return 0.5 * twice;
}

double enclosed_area(const Curve& curve) { return std::abs(signed_area(curve.vertices())); }

double perimeter(PointSpan polygon) {
  double total = 0.0;
  const std::size_t n = polygon.size();
  for (std::size_t i = 0; i < n; ++i) total += distance(polygon[i], polygon[(i + 1) % n]);
  return total;
}

std::vector<double> edge_lengths(PointSpan polygon) {
  const std::size_t n = polygon.size();
  std::vector<double> lengths(n);
  for (std::size_t i = 0; i < n; ++i) lengths[i] = distance(polygon[i], polygon[(i + 1) % n]);
  return lengths;
}

double diameter(PointSpan polygon) {
  if (polygon.empty()) return 0.0;
  Vec2 lo = polygon.front();
  Vec2 hi = polygon.front();
  for (const Vec2& p : polygon) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
  }
  return norm(hi - lo);
}

bool is_simple(PointSpan polygon) {
  const std::size_t n = polygon.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = polygon[i];
    const Vec2 b = polygon[(i + 1) % n];
    for (std::size_t j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;  // neighbours through the closing edge
      if (segments_intersect(a, b, polygon[j], polygon[(j + 1) % n])) return false;
    }
  }
  return true;
}

double edge_length_ratio(PointSpan polygon) {
  const auto lengths = edge_lengths(polygon);
  const auto [lo, hi] = std::minmax_element(lengths.begin(), lengths.end());
  return *hi / *lo;
}

Vec2 curvature_stencil(Vec2 prev, Vec2 centre, Vec2 next) {
  const Vec2 back = centre - prev;
  const Vec2 fwd = next - centre;
  const double lb = norm(back);
  const double lf = norm(fwd);
  return (fwd / lf - back / lb) / (0.5 * (lb + lf));
}

std::vector<Vec2> discrete_curvature_vector(const Curve& curve) {
  const PointSpan x = curve.vertices();
  const std::size_t n = x.size();
  const auto lengths = edge_lengths(x);
  const double floor = kDegenerateEdge * diameter(x);
  for (std::size_t i = 0; i < n; ++i) {
    if (lengths[i] <= floor) {
      throw InvalidInput("degenerate edge " + std::to_string(i) + " in curvature evaluation");
    }
  }
  std::vector<Vec2> kappa(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t ip = (i + 1) % n;
    const std::size_t im = (i + n - 1) % n;
    const Vec2 fwd = (x[ip] - x[i]) / lengths[i];
    const Vec2 back = (x[i] - x[im]) / lengths[im];
    kappa[i] = (fwd - back) / (0.5 * (lengths[i] + lengths[im]));
  }
  return kappa;
}

std::vector<Vec2> vertex_normals(PointSpan polygon) {
  const std::size_t n = polygon.size();
  std::vector<Vec2> normals(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 t = polygon[(i + 1) % n] - polygon[(i + n - 1) % n];
    normals[i] = perp_cw(t) / norm(t);
  }
  return normals;
}

bool inside_even_odd(PointSpan polygon, Vec2 p) {
  const std::size_t n = polygon.size();
  bool inside = false;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = polygon[i];
    const Vec2 b = polygon[(i + 1) % n];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < x_cross) inside = !inside;
    }
  }
  return inside;
}

SegmentHit project_to_segment(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = squared_norm(ab);
  double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const Vec2 q = a + ab * t;
  return {distance(p, q), 0, t};
}

SegmentHit closest_on_polygon(PointSpan polygon, Vec2 p) {
  const std::size_t n = polygon.size();
  SegmentHit best{std::numeric_limits<double>::infinity(), 0, 0.0};
  for (std::size_t i = 0; i < n; ++i) {
    SegmentHit hit = project_to_segment(p, polygon[i], polygon[(i + 1) % n]);
    if (hit.distance < best.distance) {
      hit.segment = i;
      best = hit;
    }
  }
  return best;
}

double signed_distance(PointSpan polygon, Vec2 p) {
  const double d = closest_on_polygon(polygon, p).distance;
  if (d == 0.0) return 0.0;
  return inside_even_odd(polygon, p) ? -d : d;
}

NearestPoint hausdorff_point_distance(PointSpan points, Vec2 x) {
  if (points.empty()) throw InvalidInput("Hausdorff distance to an empty point set");
  NearestPoint best{std::numeric_limits<double>::infinity(), 0};
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double d = distance(x, points[i]);
    if (d < best.distance) best = {d, i};
  }
  return best;
}

namespace detail {

BucketGrid::BucketGrid(std::span<const Vec2> box_lo, std::span<const Vec2> box_hi, double cell) {
  Vec2 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  Vec2 hi = -lo;
  for (std::size_t k = 0; k < box_lo.size(); ++k) {
    lo = {std::min(lo.x, box_lo[k].x), std::min(lo.y, box_lo[k].y)};
    hi = {std::max(hi.x, box_hi[k].x), std::max(hi.y, box_hi[k].y)};
  }
  const double extent = std::max(hi.x - lo.x, hi.y - lo.y);
  if (!(cell > 0.0) || !std::isfinite(cell)) cell = extent > 0.0 ? extent : 1.0;
  // Keep the cell count bounded for very uneven inputs.
  const double min_cell = extent / 1024.0;
  cell_ = std::max(cell, min_cell > 0.0 ? min_cell : cell);
  origin_ = lo;
  nx_ = std::max(1L, static_cast<long>(std::floor((hi.x - lo.x) / cell_)) + 1);
  ny_ = std::max(1L, static_cast<long>(std::floor((hi.y - lo.y) / cell_)) + 1);

  auto cell_range = [&](Vec2 a, Vec2 b) {
    const long i0 = std::clamp(static_cast<long>(std::floor((a.x - origin_.x) / cell_)), 0L, nx_ - 1);
    const long j0 = std::clamp(static_cast<long>(std::floor((a.y - origin_.y) / cell_)), 0L, ny_ - 1);
    const long i1 = std::clamp(static_cast<long>(std::floor((b.x - origin_.x) / cell_)), 0L, nx_ - 1);
    const long j1 = std::clamp(static_cast<long>(std::floor((b.y - origin_.y) / cell_)), 0L, ny_ - 1);
    return std::array<long, 4>{i0, j0, i1, j1};
  };

  const std::size_t n_cells = static_cast<std::size_t>(nx_ * ny_);
  offsets_.assign(n_cells + 1, 0);
  for (std::size_t k = 0; k < box_lo.size(); ++k) {
    const auto [i0, j0, i1, j1] = cell_range(box_lo[k], box_hi[k]);
    for (long j = j0; j <= j1; ++j)
      for (long i = i0; i <= i1; ++i) ++offsets_[static_cast<std::size_t>(j * nx_ + i) + 1];
  }
  for (std::size_t c = 0; c < n_cells; ++c) offsets_[c + 1] += offsets_[c];
  items_.resize(offsets_.back());
  std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
  for (std::size_t k = 0; k < box_lo.size(); ++k) {
    const auto [i0, j0, i1, j1] = cell_range(box_lo[k], box_hi[k]);
    for (long j = j0; j <= j1; ++j)
      for (long i = i0; i <= i1; ++i) items_[fill[static_cast<std::size_t>(j * nx_ + i)]++] = k;
  }
}

}  // namespace detail

SegmentIndex::SegmentIndex(PointSpan polygon) : polygon_(polygon) {
  const std::size_t n = polygon.size();
  if (n < 2) throw InvalidInput("segment index needs at least two vertices");
  std::vector<Vec2> lo(n);
  std::vector<Vec2> hi(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = polygon[i];
    const Vec2 b = polygon[(i + 1) % n];
    lo[i] = {std::min(a.x, b.x), std::min(a.y, b.y)};
    hi[i] = {std::max(a.x, b.x), std::max(a.y, b.y)};
  }
  grid_ = detail::BucketGrid(lo, hi, perimeter(polygon) / static_cast<double>(n));
}

SegmentHit SegmentIndex::closest(Vec2 p) const {
  const std::size_t n = polygon_.size();
  SegmentHit best_hit;
  const auto [d, seg] = grid_.nearest(p, [&](std::size_t i) {
    return project_to_segment(p, polygon_[i], polygon_[(i + 1) % n]).distance;
  });
  best_hit = project_to_segment(p, polygon_[seg], polygon_[(seg + 1) % n]);
  best_hit.segment = seg;
  best_hit.distance = d;
  return best_hit;
}

double SegmentIndex::signed_distance(Vec2 p) const {
  const double d = closest(p).distance;
  if (d == 0.0) return 0.0;
  return inside_even_odd(polygon_, p) ? -d : d;
}

PointIndex::PointIndex(PointSpan points) : points_(points) {
  if (points.empty()) throw InvalidInput("Hausdorff distance to an empty point set");
  Vec2 lo = points.front();
  Vec2 hi = points.front();
  for (const Vec2& p : points) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
  }
  const double extent = std::max(hi.x - lo.x, hi.y - lo.y);
  const double cell = extent / std::max(1.0, std::sqrt(static_cast<double>(points.size())));
  grid_ = detail::BucketGrid(points, points, cell);
}

NearestPoint PointIndex::nearest(Vec2 x) const {
  const auto [d, i] = grid_.nearest(x, [&](std::size_t k) { return distance(x, points_[k]); });
  return {d, i};
}

}  // namespace cellfit
