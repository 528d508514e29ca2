#pragma once

// Residual vectors chi in R^{2 n_s} comparing a simulated trajectory with
// observations, and J = 1/2 chi^T chi. Entries 0..n_s-1 measure position,
// entries n_s..2n_s-1 measure concentration.

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cellfit/forward_solver.hpp"
#include "cellfit/observations.hpp"

namespace cellfit {

// Residual value reported for every entry when the forward solve fails.
inline constexpr double failure_sentinel = 1e10;

struct ResidualVector {
  std::vector<double> chi;
  std::size_t n_snapshots = 0;
  bool failed = false;
  std::string failure;

  std::span<const double> position() const { return {chi.data(), n_snapshots}; }
  std::span<const double> concentration() const {
    return {chi.data() + n_snapshots, n_snapshots};
  }

  static ResidualVector sentinel(std::size_t n_snapshots, std::string reason);
};

struct ObjectiveValue {
  double total = 0.0;
  double position = 0.0;       // 1/2 sum of squared position residuals
  double concentration = 0.0;  // 1/2 sum of squared concentration residuals
};

double objective_value(std::span<const double> chi);
ObjectiveValue objective_split(const ResidualVector& r);

class WeightVector {
 public:
  // Throws InvalidInput unless every entry is finite and > 0 and the length is even.
  explicit WeightVector(std::vector<double> w);

  static WeightVector ones(std::size_t n_snapshots);
  // Position weights 1, concentration weights alpha.
  static WeightVector alpha(std::size_t n_snapshots, double alpha);
  // Position weights 1; concentration weights chosen so both halves of J are
  // equal for the given unit-weight residuals.
  static WeightVector balanced(const ResidualVector& unit_weight_reference);

  std::size_t size() const noexcept { return w_.size(); }
  std::size_t n_snapshots() const noexcept { return w_.size() / 2; }
  double operator[](std::size_t i) const { return w_[i]; }
  std::span<const double> values() const noexcept { return w_; }

 private:
  std::vector<double> w_;
};

struct SnapshotMismatch {
  double position = 0.0;
  double concentration = 0.0;
};

// Mean symmetric vertex-to-point-cloud distance and mean closest-point 1-norm
// concentration difference, unweighted.
SnapshotMismatch sharp_mismatch(PointSpan computed, const VertexField& computed_fields,
                                PointSpan observed, const VertexField& observed_fields);

ResidualVector sharp_residuals(const Trajectory& traj, const ObservationSet& obs,
                               const WeightVector& w);

// Uniform rectangle grid, two triangles per cell split along the diagonal
// from the lower-left to the upper-right node. Nodes are numbered row by row:
// node(i, j) has index j (nx + 1) + i.
struct BulkMesh {
  Vec2 origin{};
  double h = 0.0;
  std::size_t nx = 0;  // cells along x
  std::size_t ny = 0;
  double epsilon = 0.0;

  std::size_t n_nodes() const noexcept { return (nx + 1) * (ny + 1); }
  Vec2 node(std::size_t i, std::size_t j) const {
    return {origin.x + static_cast<double>(i) * h, origin.y + static_cast<double>(j) * h};
  }
  Vec2 lower() const noexcept { return origin; }
  Vec2 upper() const noexcept {
    return {origin.x + static_cast<double>(nx) * h, origin.y + static_cast<double>(ny) * h};
  }
};

inline constexpr double default_cells_per_epsilon = 4.5;

// Joint bounding box inflated by 2.5 epsilon, grid spacing
// epsilon / cells_per_epsilon, centred on the box.
BulkMesh build_bulk_mesh(std::span<const PointSpan> curves, double epsilon,
                         double cells_per_epsilon = default_cells_per_epsilon);

struct PhaseFieldNodal {
  std::vector<double> phi;
  std::vector<std::vector<double>> a;  // per species
};

// phi = sin(pi d / 2 eps) clipped to -1 inside / +1 outside the band, and
// a = cos(pi d / 2 eps) a(closest point) inside the band, 0 outside.
PhaseFieldNodal phase_field_fields(PointSpan curve, const VertexField& fields,
                                   const BulkMesh& mesh);

// Exact L2 norm of the piecewise-linear interpolant of nodal values.
double l2_norm(const BulkMesh& mesh, std::span<const double> nodal);

// Unweighted L2 differences of phi and of the species fields (all species
// together) on one shared mesh.
SnapshotMismatch phase_field_mismatch(PointSpan computed, const VertexField& computed_fields,
                                      PointSpan observed, const VertexField& observed_fields,
                                      double epsilon,
                                      double cells_per_epsilon = default_cells_per_epsilon);

// Requires ordered observations.
ResidualVector phase_field_residuals(const Trajectory& traj, const ObservationSet& obs,
                                     const WeightVector& w, double epsilon,
                                     double cells_per_epsilon = default_cells_per_epsilon);

enum class ObjectiveForm { sharp, phase_field };

struct ObjectiveOptions {
  ObjectiveForm form = ObjectiveForm::sharp;
  double epsilon = 0.5;
  double cells_per_epsilon = default_cells_per_epsilon;
};

ResidualVector residuals(const Trajectory& traj, const ObservationSet& obs,
                         const WeightVector& w, const ObjectiveOptions& options);

// c -> chi(c): simulate from the first observation and compare. Forward
// failures yield the sentinel residual. Safe to call concurrently.
class ResidualProblem {
 public:
  ResidualProblem(ModelSpec spec, SolverConfig config, ObservationSet obs, WeightVector w,
                  ObjectiveOptions options);

  ResidualVector operator()(std::span<const double> c) const;
  Trajectory simulate(std::span<const double> c) const;

  std::size_t n_parameters() const noexcept { return spec_.n_parameters(); }
  std::size_t n_residuals() const noexcept { return 2 * obs_.n_fit(); }
  const ModelSpec& spec() const noexcept { return spec_; }
  const ObservationSet& observations() const noexcept { return obs_; }
  const WeightVector& weights() const noexcept { return w_; }
  void set_weights(WeightVector w);

 private:
  ModelSpec spec_;
  SolverConfig config_;
  ObservationSet obs_;
  WeightVector w_;
  ObjectiveOptions options_;
  Curve initial_curve_;
  std::vector<double> times_;
};

}  // namespace cellfit
