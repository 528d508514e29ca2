#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "cellfit/errors.hpp"
#include "cellfit/objective.hpp"

namespace cellfit {

BulkMesh build_bulk_mesh(std::span<const PointSpan> curves, double epsilon,
                         double cells_per_epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw InvalidInput("epsilon must be positive");
  if (!(cells_per_epsilon > 4.0)) {
    throw InvalidInput("bulk mesh needs more than 4 cells per epsilon");
  }
  Vec2 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  Vec2 hi = -lo;
  std::size_t count = 0;
  for (PointSpan curve : curves) {
    for (const Vec2& p : curve) {
      lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
      hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
      ++count;
    }
  }
  if (count == 0) throw InvalidInput("bulk mesh needs at least one point");

  const double margin = 2.5 * epsilon;
  lo = lo - Vec2{margin, margin};
  hi = hi + Vec2{margin, margin};
  BulkMesh mesh;
  mesh.epsilon = epsilon;
  mesh.h = epsilon / cells_per_epsilon;
  mesh.nx = static_cast<std::size_t>(std::ceil((hi.x - lo.x) / mesh.h));
  mesh.ny = static_cast<std::size_t>(std::ceil((hi.y - lo.y) / mesh.h));
  const Vec2 centre = (lo + hi) * 0.5;
  mesh.origin = {centre.x - 0.5 * static_cast<double>(mesh.nx) * mesh.h,
                 centre.y - 0.5 * static_cast<double>(mesh.ny) * mesh.h};
  return mesh;
}

namespace {

// Evaluates phi and the extended species one grid row at a time. Inside/outside
// comes from a sorted scanline of edge crossings using the same crossing
// formula as inside_even_odd; exact distances are only computed for nodes
// whose cell lies within epsilon of some edge's bounding box.
class RowSampler {
 public:
  RowSampler(PointSpan polygon, const VertexField& fields, const BulkMesh& mesh)
      : polygon_(polygon), fields_(fields), mesh_(mesh), index_(polygon) {
    if (fields_.n_species() > 0 && fields_.n_vertices() != polygon_.size()) {
      throw InvalidInput("field length does not match the curve");
    }
  }

  std::size_t n_species() const noexcept { return fields_.n_species(); }

  // phi has nx + 1 entries; a has n_species (nx + 1), species-major.
  void sample(std::size_t j, std::span<double> phi, std::span<double> a) {
    const std::size_t n = polygon_.size();
    const std::size_t row = mesh_.nx + 1;
    const double eps = mesh_.epsilon;
    const double y = mesh_.node(0, j).y;

    crossings_.clear();
    for (std::size_t e = 0; e < n; ++e) {
      const Vec2 p = polygon_[e];
      const Vec2 q = polygon_[(e + 1) % n];
      if ((p.y > y) != (q.y > y)) crossings_.push_back(p.x + (y - p.y) * (q.x - p.x) / (q.y - p.y));
    }
    std::sort(crossings_.begin(), crossings_.end());

    candidate_.assign(row, 0);
    for (std::size_t e = 0; e < n; ++e) {
      const Vec2 p = polygon_[e];
      const Vec2 q = polygon_[(e + 1) % n];
      if (y < std::min(p.y, q.y) - eps || y > std::max(p.y, q.y) + eps) continue;
      const double x_lo = (std::min(p.x, q.x) - eps - mesh_.origin.x) / mesh_.h;
      const double x_hi = (std::max(p.x, q.x) + eps - mesh_.origin.x) / mesh_.h;
      const long i0 = std::max(0L, static_cast<long>(std::ceil(x_lo)) - 1);
      const long i1 = std::min(static_cast<long>(mesh_.nx), static_cast<long>(std::floor(x_hi)) + 1);
      for (long i = i0; i <= i1; ++i) candidate_[static_cast<std::size_t>(i)] = 1;
    }

    const std::size_t ns = fields_.n_species();
    std::size_t passed = 0;
    for (std::size_t i = 0; i < row; ++i) {
      const Vec2 x = mesh_.node(i, j);
      while (passed < crossings_.size() && crossings_[passed] <= x.x) ++passed;
      const bool inside = (crossings_.size() - passed) % 2 == 1;
      if (candidate_[i]) {
        const SegmentHit hit = index_.closest(x);
        if (hit.distance < eps) {
          const double d = hit.distance == 0.0 ? 0.0 : (inside ? -hit.distance : hit.distance);
          const double theta = std::numbers::pi * d / (2.0 * eps);
          phi[i] = std::sin(theta);
          const double c = std::cos(theta);
          const std::size_t next = (hit.segment + 1) % n;
          for (std::size_t k = 0; k < ns; ++k) {
            const double v0 = fields_(k, hit.segment);
            a[k * row + i] = c * (v0 + hit.t * (fields_(k, next) - v0));
          }
          continue;
        }
      }
      phi[i] = inside ? -1.0 : 1.0;
      for (std::size_t k = 0; k < ns; ++k) a[k * row + i] = 0.0;
    }
  }

 private:
  PointSpan polygon_;
  const VertexField& fields_;
  const BulkMesh& mesh_;
  SegmentIndex index_;
  std::vector<double> crossings_;
  std::vector<char> candidate_;
};

// Integral of u^2 over the cells between two rows for a P1 interpolant.
double row_strip_integral(std::span<const double> lower, std::span<const double> upper, double h) {
  auto q = [](double a, double b, double c) { return a * a + b * b + c * c + a * b + b * c + c * a; };
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < lower.size(); ++i) {
    sum += q(lower[i], lower[i + 1], upper[i + 1]) + q(lower[i], upper[i + 1], upper[i]);
  }
  return sum * h * h / 12.0;
}

}  // namespace

PhaseFieldNodal phase_field_fields(PointSpan curve, const VertexField& fields,
                                   const BulkMesh& mesh) {
  RowSampler sampler(curve, fields, mesh);
  const std::size_t row = mesh.nx + 1;
  const std::size_t ns = fields.n_species();
  PhaseFieldNodal out;
  out.phi.resize(mesh.n_nodes());
  out.a.assign(ns, std::vector<double>(mesh.n_nodes()));
  std::vector<double> a_row(ns * row);
  for (std::size_t j = 0; j <= mesh.ny; ++j) {
    sampler.sample(j, std::span<double>(out.phi).subspan(j * row, row), a_row);
    for (std::size_t k = 0; k < ns; ++k) {
      std::copy_n(a_row.begin() + static_cast<std::ptrdiff_t>(k * row), row,
                  out.a[k].begin() + static_cast<std::ptrdiff_t>(j * row));
    }
  }
  return out;
}

double l2_norm(const BulkMesh& mesh, std::span<const double> nodal) {
  if (nodal.size() != mesh.n_nodes()) throw InvalidInput("nodal array does not match the mesh");
  const std::size_t row = mesh.nx + 1;
  double sum = 0.0;
  for (std::size_t j = 0; j < mesh.ny; ++j) {
    sum += row_strip_integral(nodal.subspan(j * row, row), nodal.subspan((j + 1) * row, row), mesh.h);
  }
  return std::sqrt(sum);
}

SnapshotMismatch phase_field_mismatch(PointSpan computed, const VertexField& computed_fields,
                                      PointSpan observed, const VertexField& observed_fields,
                                      double epsilon, double cells_per_epsilon) {
  if (computed_fields.n_species() != observed_fields.n_species()) {
    throw InvalidInput("species counts differ");
  }
  const std::array<PointSpan, 2> curves{computed, observed};
  const BulkMesh mesh = build_bulk_mesh(curves, epsilon, cells_per_epsilon);
  RowSampler sim(computed, computed_fields, mesh);
  RowSampler obs(observed, observed_fields, mesh);
  const std::size_t row = mesh.nx + 1;
  const std::size_t ns = computed_fields.n_species();

  std::vector<double> phi_sim(row), phi_obs(row), a_sim(ns * row), a_obs(ns * row);
  // Differences for the previous and current row.
  std::vector<double> dphi_prev(row), dphi(row), da_prev(ns * row), da(ns * row);
  auto sample_difference = [&](std::size_t j, std::vector<double>& dp, std::vector<double>& dq) {
    sim.sample(j, phi_sim, a_sim);
    obs.sample(j, phi_obs, a_obs);
    for (std::size_t i = 0; i < row; ++i) dp[i] = phi_obs[i] - phi_sim[i];
    for (std::size_t i = 0; i < ns * row; ++i) dq[i] = a_obs[i] - a_sim[i];
  };

  double phi_sq = 0.0;
  double a_sq = 0.0;
  sample_difference(0, dphi_prev, da_prev);
  for (std::size_t j = 1; j <= mesh.ny; ++j) {
    sample_difference(j, dphi, da);
    phi_sq += row_strip_integral(dphi_prev, dphi, mesh.h);
    for (std::size_t k = 0; k < ns; ++k) {
      const std::span<const double> lower(da_prev.data() + k * row, row);
      const std::span<const double> upper(da.data() + k * row, row);
      a_sq += row_strip_integral(lower, upper, mesh.h);
    }
    std::swap(dphi_prev, dphi);
    std::swap(da_prev, da);
  }
  return {std::sqrt(phi_sq), std::sqrt(a_sq)};
}

}  // namespace cellfit
