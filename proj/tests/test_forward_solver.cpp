#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "cellfit/errors.hpp"
#include "cellfit/forward_solver.hpp"
#include "test_support.hpp"

using namespace cellfit;
using cellfit::testing::regular_polygon;

namespace {

Model still_model(std::vector<double> diffusion = {1.0}) {
  Model m;
  m.kinetics = NoKinetics{};
  m.forcing = ProportionalForcing{{}};
  m.physics.surface_tension = 0.0;
  m.physics.bending_rigidity = 0.0;
  m.physics.volume_penalty = 0.0;
  m.physics.diffusion = std::move(diffusion);
  return m;
}

SolverConfig config(double dt, std::size_t n) {
  SolverConfig c;
  c.dt = dt;
  c.n_vertices = n;
  return c;
}

double mean_radius(const Curve& c) {
  double r = 0.0;
  for (const Vec2& p : c.vertices()) r += norm(p);
  return r / static_cast<double>(c.size());
}

double run_to(SolverState s, const SolverConfig& cfg, const Model& m, long steps, Curve* out) {
  ForwardSolver solver(std::move(s), cfg, m);
  for (long k = 0; k < steps; ++k) solver.step();
  *out = solver.state().curve();
  return solver.state().time();
}

}  // namespace

TEST(ForwardSolver, ZeroForceKeepsEverythingFixed) {
  const Curve c(regular_polygon(64, 1.0));
  const VertexField f(2, 64, 0.7);
  const Trajectory t = simulate(c, f, config(0.01, 64), still_model({1.0, 100.0}),
                                std::vector<double>{0.0, 0.5, 1.0});
  ASSERT_EQ(t.snapshots.size(), 3u);
  for (const auto& s : t.snapshots) {
    for (std::size_t i = 0; i < 64; ++i) {
      EXPECT_NEAR(distance(s.curve[i], c[i]), 0.0, 1e-13);
      EXPECT_NEAR(s.fields(0, i), 0.7, 1e-12);
      EXPECT_NEAR(s.fields(1, i), 0.7, 1e-12);
    }
  }
}

// Curve shortening: r^2 = r0^2 - 2 sigma t.
TEST(ForwardSolver, ShrinkingCircleUnderTension) {
  Model m = still_model();
  m.physics.surface_tension = 0.1;
  const Curve c(regular_polygon(128, 1.0));
  Curve end = c;
  const double t = run_to(SolverState(c, VertexField(1, 128, 1.0)), config(1e-3, 128), m, 1000, &end);
  EXPECT_NEAR(mean_radius(end), std::sqrt(1.0 - 2.0 * 0.1 * t), 1e-3);
}

// Bending alone expands a circle: r^4 = r0^4 + 2 k_b t.
TEST(ForwardSolver, ExpandingCircleUnderBending) {
  Model m = still_model();
  m.physics.bending_rigidity = 0.5;
  const Curve c(regular_polygon(128, 1.0));
  Curve end = c;
  const double t = run_to(SolverState(c, VertexField(1, 128, 1.0)), config(1e-3, 128), m, 1000, &end);
  EXPECT_NEAR(mean_radius(end), std::pow(1.0 + 2.0 * 0.5 * t, 0.25), 1e-3);
}

// Under g = k a alone a regular polygon stays regular, every vertex moves by
// dt k a radially and the conserved mass gives a = a0 r0 / r, so the radius
// follows r_{m+1} = r_m + dt k a0 r0 / r_m exactly.
TEST(ForwardSolver, ForcingOnRegularPolygonFollowsRadialRecurrence) {
  const double k = 0.3;
  const double dt = 1e-2;
  Model m = still_model({1.0});
  m.forcing = ProportionalForcing{{k}};
  const Curve c(regular_polygon(64, 1.0));
  ForwardSolver solver(SolverState(c, VertexField(1, 64, 2.0)), config(dt, 64), m);
  double r = 1.0;
  for (int step = 0; step < 100; ++step) {
    solver.step();
    r += dt * k * 2.0 / r;
  }
  EXPECT_NEAR(mean_radius(solver.state().curve()), r, 1e-12);
  EXPECT_NEAR(solver.state().fields()(0, 17), 2.0 / r, 1e-12);
  // Continuous limit r^2 = 1 + 2 k a0 t.
  EXPECT_NEAR(r, std::sqrt(1.0 + 2.0 * k * 2.0 * 1.0), 5e-3);
}

// A Fourier mode on a fixed regular polygon decays by 1 / (1 + dt D lambda_k)
// per implicit step, with lambda_k = (2 - 2 cos(2 pi k / N)) / l^2.
TEST(ForwardSolver, DiffusionOfFourierModeMatchesDiscreteEigenvalue) {
  const std::size_t n = 40;
  const int mode = 3;
  const double d = 0.7;
  const double dt = 0.05;
  const Curve c(regular_polygon(n, 1.0));
  VertexField f(1, n);
  for (std::size_t i = 0; i < n; ++i) {
    f(0, i) = 2.0 + std::cos(2.0 * std::numbers::pi * mode * static_cast<double>(i) / n);
  }
  ForwardSolver solver(SolverState(c, f), config(dt, n), still_model({d}));
  const int steps = 10;
  for (int k = 0; k < steps; ++k) solver.step();
  const double l = edge_lengths(c.vertices())[0];
  const double lambda = (2.0 - 2.0 * std::cos(2.0 * std::numbers::pi * mode / n)) / (l * l);
  const double factor = std::pow(1.0 / (1.0 + dt * d * lambda), steps);
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_NEAR(solver.state().fields()(0, i), 2.0 + factor * (f(0, i) - 2.0), 1e-12);
  }
}

TEST(ForwardSolver, HomogeneousSteadyStateIsPreserved) {
  Model m = still_model({1.0, 100.0});
  m.kinetics = Schnakenberg{20.0, 0.1, 0.9};
  const auto ss = steady_state(20.0, 0.1, 0.9);
  const Curve c(regular_polygon(32, 1.0));
  VertexField f(2, 32);
  for (std::size_t i = 0; i < 32; ++i) {
    f(0, i) = ss[0];
    f(1, i) = ss[1];
  }
  ForwardSolver solver(SolverState(c, f), config(1e-3, 32), m);
  for (int k = 0; k < 100; ++k) solver.step();
  for (std::size_t i = 0; i < 32; ++i) {
    EXPECT_NEAR(solver.state().fields()(0, i), ss[0], 1e-12);
    EXPECT_NEAR(solver.state().fields()(1, i), ss[1], 1e-12);
  }
}

// Without reaction the lumped mass is conserved on a moving, deforming mesh.
TEST(ForwardSolver, MassIsConservedWithoutReaction) {
  Model m;
  m.kinetics = NoKinetics{};
  m.forcing = ProportionalForcing{{-0.05, 0.2}};
  m.physics.diffusion = {1.0, 0.01};
  const auto [c, f0] = make_initial_data({}, 96, SteadyStatePerturbationRule{});
  VertexField f = f0;
  for (std::size_t i = 0; i < 96; ++i) f(1, i) = 0.5 + 0.4 * std::max(0.0, c[i].x);
  const auto before = total_mass(c, f);
  ForwardSolver solver(SolverState(c, f), config(1e-2, 96), m);
  for (int k = 0; k < 200; ++k) solver.step();
  const auto after = total_mass(solver.state().curve(), solver.state().fields());
  EXPECT_GT(distance(solver.state().curve()[0], c[0]), 1e-3);
  for (std::size_t s = 0; s < 2; ++s) EXPECT_NEAR(after[s] / before[s], 1.0, 1e-11);
}

TEST(ForwardSolver, StepperAndFreeStepAgreeBitwise) {
  const auto [c, f] = make_initial_data({}, 48, SteadyStatePerturbationRule{});
  ModelSpec spec;
  const Model m = base_model(spec);
  const SolverConfig cfg = config(1e-2, 48);
  ForwardSolver solver(SolverState(c, f), cfg, m);
  SolverState free(c, f);
  for (int k = 0; k < 20; ++k) {
    solver.step();
    free = step(free, cfg, m);
  }
  EXPECT_EQ(solver.state().curve(), free.curve());
  EXPECT_EQ(solver.state().fields(), free.fields());
  EXPECT_EQ(solver.state().step_index(), 20);
}

TEST(ForwardSolver, SimulateIsDeterministic) {
  const auto [c, f] = make_initial_data({}, 64, SteadyStatePerturbationRule{});
  const Model m = base_model(ModelSpec{});
  const std::vector<double> times{0.0, 0.1, 0.2};
  const Trajectory a = simulate(c, f, config(1e-2, 64), m, times);
  const Trajectory b = simulate(c, f, config(1e-2, 64), m, times);
  ASSERT_EQ(a.snapshots.size(), b.snapshots.size());
  for (std::size_t k = 0; k < a.snapshots.size(); ++k) {
    EXPECT_EQ(a.snapshots[k].curve, b.snapshots[k].curve);
    EXPECT_EQ(a.snapshots[k].fields, b.snapshots[k].fields);
    EXPECT_EQ(a.snapshots[k].time, b.snapshots[k].time);
  }
}

TEST(ForwardSolver, VolumePenaltyRestoresArea) {
  const Curve c(regular_polygon(64, 1.0));
  const VertexField f(1, 64, 1.0);
  auto area_after = [&](double lambda, bool literal) {
    Model m = still_model();
    m.forcing = ProportionalForcing{{0.2}};
    m.physics.volume_penalty = lambda;
    SolverConfig cfg = config(1e-2, 64);
    cfg.literal_volume_sign = literal;
    ForwardSolver solver(SolverState(c, f), cfg, m);
    for (int k = 0; k < 50; ++k) solver.step();
    return enclosed_area(solver.state().curve());
  };
  const double free = area_after(0.0, false);
  EXPECT_GT(free, enclosed_area(c));
  EXPECT_LT(area_after(0.1, false), free);
  EXPECT_GT(area_after(0.1, true), free);
}

TEST(ForwardSolver, OverflowRaisesSolverDiverged) {
  Model m = still_model();
  m.forcing = ProportionalForcing{{1e308}};
  const Curve c(regular_polygon(32, 1.0));
  ForwardSolver solver(SolverState(c, VertexField(1, 32, 10.0)), config(1e-2, 32), m);
  EXPECT_THROW(solver.step(), SolverDiverged);
}

// An inward jump of 0.8 on an ellipse with semi-axes 2 and 1 overshoots the
// curvature radius 0.5 at the ends and produces swallowtails.
TEST(ForwardSolver, SelfIntersectionRaisesGeometricBreakdown) {
  std::vector<Vec2> pts = regular_polygon(128, 1.0);
  for (Vec2& p : pts) p.x *= 2.0;
  Model m = still_model();
  m.forcing = ProportionalForcing{{-80.0}};
  SolverConfig cfg = config(1e-2, 128);
  cfg.check_self_intersection = true;
  ForwardSolver solver(SolverState(Curve(pts), VertexField(1, 128, 1.0)), cfg, m);
  EXPECT_THROW(solver.step(), GeometricBreakdown);
  try {
    ForwardSolver again(SolverState(Curve(pts), VertexField(1, 128, 1.0)), cfg, m);
    again.step();
  } catch (const SolverError& e) {
    EXPECT_EQ(e.step_index(), 1);
    EXPECT_NE(std::string(e.what()).find("self-intersects"), std::string::npos);
  }
}

TEST(ForwardSolver, ObservationTimesAreSnappedAndPrepended) {
  const Curve c(regular_polygon(16, 1.0));
  const VertexField f(1, 16, 1.0);
  const Trajectory t =
      simulate(c, f, config(0.01, 16), still_model(), std::vector<double>{0.015, 0.05});
  ASSERT_EQ(t.snapshots.size(), 3u);
  EXPECT_EQ(t.snapshots[0].time, 0.0);
  EXPECT_NEAR(t.snapshots[1].time, 0.02, 1e-15);
  EXPECT_NEAR(t.snapshots[2].time, 0.05, 1e-15);
  EXPECT_THROW(simulate(c, f, config(0.01, 16), still_model(), std::vector<double>{0.0, 0.1, 0.1}),
               InvalidInput);
  EXPECT_THROW(simulate(c, f, config(0.01, 16), still_model(), std::vector<double>{0.0, 0.2, 0.1}),
               InvalidInput);
}

TEST(ForwardSolver, RemeshEqualizesEdgesAndKeepsMass) {
  std::vector<Vec2> pts;
  for (std::size_t k = 0; k < 40; ++k) {
    const double s = static_cast<double>(k) / 40.0;
    const double t = 2.0 * std::numbers::pi * (s + 0.12 * std::sin(2.0 * std::numbers::pi * s));
    pts.push_back({std::cos(t), 0.6 * std::sin(t)});
  }
  const Curve c(pts);
  VertexField f(2, 40);
  for (std::size_t i = 0; i < 40; ++i) {
    f(0, i) = 1.0 + pts[i].x;
    f(1, i) = 3.0;
  }
  ASSERT_GT(edge_length_ratio(c.vertices()), 2.0);
  const auto [rc, rf] = remesh_equal_arclength(c, f);
  EXPECT_EQ(rc.size(), 40u);
  EXPECT_LT(edge_length_ratio(rc.vertices()), 1.05);
  EXPECT_EQ(rc[0], c[0]);
  const auto before = total_mass(c, f);
  const auto after = total_mass(rc, rf);
  for (std::size_t s = 0; s < 2; ++s) EXPECT_NEAR(after[s], before[s], 1e-12 * before[s]);
  // Constant fields stay constant; the rescale only compensates the chord length.
  for (std::size_t i = 0; i < 40; ++i) EXPECT_EQ(rf(1, i), rf(1, 0));
  EXPECT_NEAR(rf(1, 0), 3.0, 0.03);
}

TEST(ForwardSolver, RemeshTriggersOnlyAboveThreshold) {
  const Curve c(regular_polygon(32, 1.0));
  Model m = still_model();
  m.physics.surface_tension = 0.1;
  ForwardSolver solver(SolverState(c, VertexField(1, 32, 1.0)), config(1e-2, 32), m);
  for (int k = 0; k < 10; ++k) solver.step();
  EXPECT_EQ(solver.remesh_events(), 0);
}

TEST(ForwardSolver, RejectsInconsistentInput) {
  const Curve c(regular_polygon(16, 1.0));
  EXPECT_THROW(SolverState(c, VertexField(1, 15, 1.0)), InvalidInput);
  EXPECT_THROW(ForwardSolver(SolverState(c, VertexField(2, 16, 1.0)), config(0.01, 16), still_model()),
               InvalidInput);
  Model negative = still_model();
  negative.physics.diffusion = {-1.0};
  EXPECT_THROW(ForwardSolver(SolverState(c, VertexField(1, 16, 1.0)), config(0.01, 16), negative),
               InvalidInput);
  EXPECT_THROW(config(0.0, 16).validate(), InvalidInput);
  EXPECT_THROW(config(0.01, 4).validate(), InvalidInput);
}

TEST(ForwardSolver, InitialData) {
  const Curve circle = make_initial_curve({}, 200);
  EXPECT_NEAR(enclosed_area(circle), std::numbers::pi, 1e-3);
  EXPECT_EQ(circle[0], (Vec2{1.0, 0.0}));

  const InitialShape capsule{InitialShapeKind::capsule, 8.0, 1.75};
  const Curve cap = make_initial_curve(capsule, 400);
  const double exact_area = (8.0 - 3.5) * 3.5 + std::numbers::pi * 1.75 * 1.75;
  EXPECT_NEAR(enclosed_area(cap), exact_area, 1e-3 * exact_area);
  EXPECT_NEAR(cap[0].x, 4.0, 1e-12);
  EXPECT_NEAR(diameter(cap.vertices()), std::hypot(8.0, 3.5), 1e-3);
  EXPECT_LT(edge_length_ratio(cap.vertices()), 1.01);
  EXPECT_THROW(make_initial_curve({InitialShapeKind::capsule, 1.0, 1.0}, 64), InvalidInput);

  const VertexField pol = make_initial_fields(cap, PolarizedRule{0.05, 0.5, 2.0});
  double lo = 1.0, hi = 0.0;
  for (std::size_t i = 0; i < cap.size(); ++i) {
    lo = std::min(lo, pol(0, i));
    hi = std::max(hi, pol(0, i));
  }
  EXPECT_NEAR(lo, 0.05, 1e-12);
  EXPECT_NEAR(hi, 0.5, 1e-12);

  const VertexField ss = make_initial_fields(circle, SteadyStatePerturbationRule{});
  EXPECT_EQ(ss(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(ss(1, 0), 0.9);
  EXPECT_DOUBLE_EQ(ss(1, 100), 0.9 + 0.001);
}
