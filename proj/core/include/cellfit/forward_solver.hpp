#pragma once

// Evolving-curve finite element solver for the coupled evolution law and
// surface reaction-diffusion system.
//
// One step of size dt:
//  1. Geometry. Piecewise-linear parametric FEM with curvature splitting on the
//     step-m mesh (lumped mass M, stiffness S):
//         M kappa + S X = 0
//         M (X - X^m)/dt = sigma M kappa + k_b S kappa + M F^m nu^m
//     Tension and bending are implicit; eliminating kappa leaves the SPD
//     system (M/dt + sigma S + k_b S M^{-1} S) X = M X^m/dt + M F^m nu^m per
//     coordinate. The explicit scalar F^m = 3/2 k_b H^3 + g(a^m) +
//     lambda (Vol(0) - Vol(t_m)) carries the lower-order curvature terms: on a
//     curve (Delta H + H|grad nu|^2 - H^3/2) nu equals the normal part of
//     -Delta kappa plus 3/2 H^3 nu.
//  2. Species on the moved mesh, lumped mass, reaction explicit:
//         (M^{m+1} a^{m+1} - M^m a^m)/dt + D S^{m+1} a^{m+1} = M^{m+1} f(a^m)
//  3. Optional equal-arclength remeshing when max/min edge length exceeds the
//     configured ratio, followed by a mass-preserving rescale of each species.

#include <memory>
#include <utility>
#include <variant>
#include <span>
#include <vector>

#include "cellfit/geometry.hpp"
#include "cellfit/models.hpp"

namespace cellfit {

struct SolverConfig {
  double dt = 1e-2;
  std::size_t n_vertices = 128;
  double remesh_ratio_threshold = 3.0;
  bool remesh_enabled = true;
  bool check_self_intersection = false;
  // Use +lambda (Vol(t) - Vol(0)) as printed instead of the restoring sign.
  bool literal_volume_sign = false;

  void validate() const;
};

class SolverState {
 public:
  SolverState(Curve curve, VertexField fields, double time = 0.0, long step_index = 0);
  SolverState(Curve curve, VertexField fields, double time, long step_index, double initial_area);

  const Curve& curve() const noexcept { return curve_; }
  const VertexField& fields() const noexcept { return fields_; }
  double time() const noexcept { return time_; }
  long step_index() const noexcept { return step_index_; }
  double initial_area() const noexcept { return initial_area_; }

 private:
  Curve curve_;
  VertexField fields_;
  double time_;
  long step_index_;
  double initial_area_;
};

struct Snapshot {
  double time = 0.0;
  Curve curve;
  VertexField fields;
};

struct Trajectory {
  double dt = 0.0;
  std::vector<Snapshot> snapshots;
  long remesh_events = 0;
};

// Stateful solver that keeps its factorisation workspace between steps.
class ForwardSolver {
 public:
  ForwardSolver(SolverState initial, SolverConfig config, Model model);
  ~ForwardSolver();
  ForwardSolver(ForwardSolver&&) noexcept;
  ForwardSolver& operator=(ForwardSolver&&) noexcept;

  void step();
  const SolverState& state() const noexcept { return state_; }
  long remesh_events() const noexcept { return remesh_events_; }

 private:
  struct Workspace;

  SolverState state_;
  SolverConfig config_;
  Model model_;
  std::unique_ptr<Workspace> work_;
  long remesh_events_ = 0;
};

SolverState step(const SolverState& state, const SolverConfig& config, const Model& model);

// Advances to the last observation time and records a deep copy whenever an
// observation time is reached. Time 0 (the initial data) is always the first
// snapshot. Observation times are snapped to the nearest multiple of dt.
Trajectory simulate(const Curve& curve, const VertexField& fields, const SolverConfig& config,
                    const Model& model, std::span<const double> observation_times);

// Equal-arclength resampling with linear interpolation of positions and
// species; species are then rescaled to keep the lumped mass of each.
std::pair<Curve, VertexField> remesh_equal_arclength(const Curve& curve, const VertexField& fields);

// Per-species lumped mass sum_i m_i a_i.
std::vector<double> total_mass(const Curve& curve, const VertexField& fields);

enum class InitialShapeKind { unit_circle, capsule };

struct InitialShape {
  InitialShapeKind kind = InitialShapeKind::unit_circle;
  double length = 2.0;  // capsule tip to tip
  double radius = 1.0;  // capsule end cap radius
};

struct HomogeneousRule {
  std::vector<double> values;
};

// a1 = a1*, a2 = a2* + 0.001 max(0, -x1) about the Schnakenberg steady state.
struct SteadyStatePerturbationRule {
  double gamma = 20.0;
  double k1 = 0.1;
  double k2 = 0.9;
};

// One species rising from `low` at min x1 to `high` at max x1 as
// low + (high - low) s^exponent with s the normalised x1.
struct PolarizedRule {
  double low = 0.05;
  double high = 0.5;
  double exponent = 2.0;
};

using SpeciesRule = std::variant<HomogeneousRule, SteadyStatePerturbationRule, PolarizedRule>;

Curve make_initial_curve(const InitialShape& shape, std::size_t n_vertices);
VertexField make_initial_fields(const Curve& curve, const SpeciesRule& rule);
std::pair<Curve, VertexField> make_initial_data(const InitialShape& shape, std::size_t n_vertices,
                                                const SpeciesRule& rule);

}  // namespace cellfit
