#pragma once

// Discrete geometry of closed polygonal curves in the plane.
//
// Curves are stored as an ordered vertex list; vertex i is joined to vertex
// (i + 1) mod N. Valid curves are counter-clockwise, so the clockwise
// rotation of the tangent is the outward normal. Curvature follows the
// convention Delta_Gamma x = -H nu, i.e. the curvature vector of a circle
// points to its centre and H = 1/r > 0.
//
// Distances come in two flavours:
//   * signed_distance / SegmentIndex measure to the polygon itself (segment
//     projections). The sign is negative inside, by the even-odd rule.
//   * hausdorff_point_distance / PointIndex measure to a finite point set
//     (vertices or an observed point cloud) and report the closest index.
// The grid-accelerated indices return exactly what the brute-force functions
// return, including tie-breaking towards the smallest index.

#include <cstddef>
#include <span>
#include <vector>

#include "cellfit/vec2.hpp"

namespace cellfit {

enum class CurveCheck {
  full,              // all invariants, including simplicity (O(N^2))
  skip_simplicity,   // N, edge lengths and orientation only
};

class Curve {
 public:
  explicit Curve(std::vector<Vec2> vertices, CurveCheck check = CurveCheck::full);

  std::size_t size() const noexcept { return vertices_.size(); }
  const Vec2& operator[](std::size_t i) const { return vertices_[i]; }
  PointSpan vertices() const noexcept { return vertices_; }

  friend bool operator==(const Curve&, const Curve&) = default;

 private:
  std::vector<Vec2> vertices_;
};

// Per-vertex concentrations, one array per species.
class VertexField {
 public:
  VertexField() = default;
  explicit VertexField(std::vector<std::vector<double>> species);
  VertexField(std::size_t n_species, std::size_t n_vertices, double value = 0.0);

  std::size_t n_species() const noexcept { return species_.size(); }
  std::size_t n_vertices() const noexcept {
    return species_.empty() ? 0 : species_.front().size();
  }

  std::span<const double> species(std::size_t k) const { return species_[k]; }
  std::span<double> species(std::size_t k) { return species_[k]; }
  double operator()(std::size_t k, std::size_t i) const { return species_[k][i]; }
  double& operator()(std::size_t k, std::size_t i) { return species_[k][i]; }

  const std::vector<std::vector<double>>& data() const noexcept { return species_; }

  friend bool operator==(const VertexField&, const VertexField&) = default;

 private:
  std::vector<std::vector<double>> species_;
};

// Oriented (shoelace) area; positive for counter-clockwise polygons.
double signed_area(PointSpan polygon);

// Area enclosed by a valid curve.
double enclosed_area(const Curve& curve);

double perimeter(PointSpan polygon);
std::vector<double> edge_lengths(PointSpan polygon);
// Bounding-box diagonal, used as the length scale of a curve.
double diameter(PointSpan polygon);
bool is_simple(PointSpan polygon);

// Max over min edge length.
double edge_length_ratio(PointSpan polygon);

// Curvature vector at the middle of a three-point stencil: the lumped-mass
// Laplace-Beltrami of the position, ((n - c)/|n - c| - (c - p)/|c - p|) / mean edge.
Vec2 curvature_stencil(Vec2 prev, Vec2 centre, Vec2 next);

// Per-vertex kappa_i = (M_L^{-1} (-S) x)_i ~ -H nu. Throws InvalidInput on
// edges shorter than 1e-14 of the curve diameter.
std::vector<Vec2> discrete_curvature_vector(const Curve& curve);

// Unit outward vertex normals from the central difference x_{i+1} - x_{i-1}.
std::vector<Vec2> vertex_normals(PointSpan polygon);

// Even-odd crossing test, half-open in y so a vertex on the ray counts once.
bool inside_even_odd(PointSpan polygon, Vec2 p);

struct SegmentHit {
  double distance = 0.0;
  std::size_t segment = 0;  // edge from vertex `segment` to `segment + 1`
  double t = 0.0;           // projection parameter in [0, 1]
};

SegmentHit project_to_segment(Vec2 p, Vec2 a, Vec2 b);

// Brute force over all edges. Negative inside, positive outside, exactly zero
// on the polygon's vertices.
double signed_distance(PointSpan polygon, Vec2 p);
SegmentHit closest_on_polygon(PointSpan polygon, Vec2 p);

struct NearestPoint {
  double distance = 0.0;
  std::size_t index = 0;
};

// d^H_P(x) = min_i |x - p_i| with the argmin index. Throws on empty P.
NearestPoint hausdorff_point_distance(PointSpan points, Vec2 x);

namespace detail {

// Uniform bucket grid over a bounding box. Items are registered in every cell
// their bounding box touches (CSR layout).
class BucketGrid {
 public:
  BucketGrid() = default;
  BucketGrid(std::span<const Vec2> box_lo, std::span<const Vec2> box_hi, double cell);

  // Calls dist(item) for candidate items in growing rings of cells and returns
  // the (distance, item) minimum with ties going to the smaller item index.
  template <class DistFn>
  std::pair<double, std::size_t> nearest(Vec2 p, DistFn&& dist) const;

  double cell_size() const noexcept { return cell_; }

 private:
  Vec2 origin_{};
  double cell_ = 1.0;
  long nx_ = 0;
  long ny_ = 0;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> items_;
};

}  // namespace detail

// Accelerated closest-segment queries on a closed polygon. The polygon storage
// must outlive the index.
class SegmentIndex {
 public:
  explicit SegmentIndex(PointSpan polygon);

  SegmentHit closest(Vec2 p) const;
  double signed_distance(Vec2 p) const;
  PointSpan polygon() const noexcept { return polygon_; }

 private:
  PointSpan polygon_;
  detail::BucketGrid grid_;
};

// Accelerated nearest-point queries on a point set. The storage must outlive
// the index.
class PointIndex {
 public:
  explicit PointIndex(PointSpan points);

  NearestPoint nearest(Vec2 x) const;
  PointSpan points() const noexcept { return points_; }

 private:
  PointSpan points_;
  detail::BucketGrid grid_;
};

}  // namespace cellfit

#include "cellfit/detail/bucket_grid_impl.hpp"
