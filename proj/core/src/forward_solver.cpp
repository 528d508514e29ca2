#include "cellfit/forward_solver.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <algorithm>
#include <array>
#include <optional>
#include <cmath>
#include <iostream>
#include <numbers>
#include <sstream>

#include "cellfit/errors.hpp"

namespace cellfit {

namespace {

std::string where(long step, double time) {
  std::ostringstream os;
  os << " (step " << step << ", t = " << time << ")";
  return os.str();
}

// Solves the cyclic tridiagonal system
//   sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]   (indices mod n)
// with the Sherman-Morrison correction for the two corner entries. The matrix
// must be diagonally dominant.
void solve_cyclic_tridiagonal(std::span<const double> sub, std::span<const double> diag,
                              std::span<const double> sup, std::span<const double> rhs,
                              std::span<double> x, std::vector<double>& scratch) {
  const std::size_t n = diag.size();
  scratch.resize(3 * n);
  double* bb = scratch.data();
  double* z = scratch.data() + n;
  double* c = scratch.data() + 2 * n;

  const double beta = sub[0];       // A(0, n-1)
  const double alpha = sup[n - 1];  // A(n-1, 0)
  const double gamma = -diag[0];
  for (std::size_t i = 0; i < n; ++i) bb[i] = diag[i];
  bb[0] = diag[0] - gamma;
  bb[n - 1] = diag[n - 1] - alpha * beta / gamma;

  // Thomas sweep shared by both right-hand sides.
  auto thomas = [&](const auto& r, double* out) {
    double denom = bb[0];
    out[0] = r(0) / denom;
    for (std::size_t i = 1; i < n; ++i) {
      c[i - 1] = sup[i - 1] / denom;
      denom = bb[i] - sub[i] * c[i - 1];
      out[i] = (r(i) - sub[i] * out[i - 1]) / denom;
    }
    for (std::size_t i = n - 1; i-- > 0;) out[i] -= c[i] * out[i + 1];
  };

  thomas([&](std::size_t i) { return rhs[i]; }, x.data());
  thomas(
      [&](std::size_t i) {
        if (i == 0) return gamma;
        if (i == n - 1) return alpha;
        return 0.0;
      },
      z);
  const double fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
  for (std::size_t i = 0; i < n; ++i) x[i] -= fact * z[i];
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

std::vector<double> lumped_mass(std::span<const double> lengths) {
  const std::size_t n = lengths.size();
  std::vector<double> m(n);
  for (std::size_t i = 0; i < n; ++i) m[i] = 0.5 * (lengths[(i + n - 1) % n] + lengths[i]);
  return m;
}

}  // namespace

void SolverConfig::validate() const {
  if (!(dt > 0.0)) throw InvalidInput("time step must be positive");
  if (n_vertices < 8) throw InvalidInput("solver needs at least 8 vertices");
  if (!(remesh_ratio_threshold > 1.0)) throw InvalidInput("remesh ratio threshold must exceed 1");
}

SolverState::SolverState(Curve curve, VertexField fields, double time, long step_index)
    : SolverState(curve, std::move(fields), time, step_index, enclosed_area(curve)) {}

SolverState::SolverState(Curve curve, VertexField fields, double time, long step_index,
                         double initial_area)
    : curve_(std::move(curve)),
      fields_(std::move(fields)),
      time_(time),
      step_index_(step_index),
      initial_area_(initial_area) {
  if (fields_.n_species() > 0 && fields_.n_vertices() != curve_.size()) {
    throw InvalidInput("vertex field length does not match the curve");
  }
}

struct ForwardSolver::Workspace {
  using SparseMatrix = Eigen::SparseMatrix<double>;

  std::size_t n = 0;
  SparseMatrix geometric;
  // geometric.valuePtr() slot of entry (i, i + o) for o = -2..2.
  std::vector<std::array<Eigen::Index, 5>> slot;
  Eigen::SimplicialLDLT<SparseMatrix> ldlt;
  bool analysed = false;

  Eigen::VectorXd rhs_x, rhs_y, sol_x, sol_y;
  std::vector<double> lengths, mass, new_lengths, new_mass, forcing;
  std::vector<double> sub, diag, sup, rhs, scratch, vertex_a, vertex_f;
  std::vector<std::vector<double>> reaction;

  explicit Workspace(std::size_t n_vertices) { resize(n_vertices); }

  void resize(std::size_t n_vertices) {
    n = n_vertices;
    std::vector<Eigen::Triplet<double>> triplets;
    for (std::size_t i = 0; i < n; ++i) {
      for (int o = -2; o <= 2; ++o) {
        const auto j = static_cast<Eigen::Index>((i + n + static_cast<std::size_t>(o + 2) - 2) % n);
        triplets.emplace_back(static_cast<Eigen::Index>(i), j, 1.0);
      }
    }
    geometric.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    geometric.setFromTriplets(triplets.begin(), triplets.end());
    geometric.makeCompressed();
    slot.assign(n, {});
    for (Eigen::Index col = 0; col < geometric.outerSize(); ++col) {
      for (Eigen::Index k = geometric.outerIndexPtr()[col]; k < geometric.outerIndexPtr()[col + 1];
           ++k) {
        const Eigen::Index row = geometric.innerIndexPtr()[k];
        for (int o = -2; o <= 2; ++o) {
          const auto j = static_cast<Eigen::Index>(
              (static_cast<std::size_t>(row) + n + static_cast<std::size_t>(o + 2) - 2) % n);
          if (j == col) slot[static_cast<std::size_t>(row)][static_cast<std::size_t>(o + 2)] = k;
        }
      }
    }
    analysed = false;
    rhs_x.resize(static_cast<Eigen::Index>(n));
    rhs_y.resize(static_cast<Eigen::Index>(n));
  }
};

ForwardSolver::ForwardSolver(SolverState initial, SolverConfig config, Model model)
    : state_(std::move(initial)),
      config_(std::move(config)),
      model_(std::move(model)),
      work_(std::make_unique<Workspace>(state_.curve().size())) {
  if (state_.fields().n_species() != model_.n_species()) {
    throw InvalidInput("initial data has " + std::to_string(state_.fields().n_species()) +
                       " species but the model has " + std::to_string(model_.n_species()));
  }
  for (double d : model_.physics.diffusion) {
    if (!(d > 0.0)) throw InvalidInput("diffusion coefficients must be positive");
  }
  const auto& p = model_.physics;
  if (!(p.surface_tension >= 0.0) || !(p.bending_rigidity >= 0.0) || !(p.volume_penalty >= 0.0)) {
    throw InvalidInput("surface tension, bending rigidity and volume penalty must be >= 0");
  }
  if (!(config_.dt > 0.0)) throw InvalidInput("time step must be positive");
}

ForwardSolver::~ForwardSolver() = default;
ForwardSolver::ForwardSolver(ForwardSolver&&) noexcept = default;
ForwardSolver& ForwardSolver::operator=(ForwardSolver&&) noexcept = default;

void ForwardSolver::step() {
  Workspace& w = *work_;
  const PointSpan x = state_.curve().vertices();
  const VertexField& a = state_.fields();
  const std::size_t n = x.size();
  const std::size_t n_species = a.n_species();
  const double dt = config_.dt;
  const long next_step = state_.step_index() + 1;
  const double next_time = state_.time() + dt;
  const PhysicalConstants& phys = model_.physics;

  if (w.n != n) w.resize(n);

  // Geometry of the step-m mesh.
  w.lengths = edge_lengths(x);
  w.mass = lumped_mass(w.lengths);
  const std::vector<Vec2> kappa = discrete_curvature_vector(state_.curve());
  const std::vector<Vec2> normals = vertex_normals(x);
  const double volume = signed_area(x);
  const double deviation = state_.initial_area() - volume;
  const double penalty =
      phys.volume_penalty * (config_.literal_volume_sign ? -deviation : deviation);

  w.forcing.resize(n);
  w.vertex_a.resize(n_species);
  for (std::size_t i = 0; i < n; ++i) {
    const double h = -dot(kappa[i], normals[i]);
    for (std::size_t k = 0; k < n_species; ++k) w.vertex_a[k] = a(k, i);
    w.forcing[i] = 1.5 * phys.bending_rigidity * h * h * h + model_.normal_forcing(w.vertex_a) + penalty;
  }

  // A = M/dt + sigma S + k_b S M^{-1} S; row i of S has entries at i-1, i, i+1.
  double* values = w.geometric.valuePtr();
  std::fill(values, values + w.geometric.nonZeros(), 0.0);
  auto s_row = [&](std::size_t i) {
    const double lm = w.lengths[(i + n - 1) % n];
    const double lp = w.lengths[i];
    return std::array<double, 3>{-1.0 / lm, 1.0 / lm + 1.0 / lp, -1.0 / lp};
  };
  for (std::size_t i = 0; i < n; ++i) {
    const auto si = s_row(i);
    values[w.slot[i][2]] += w.mass[i] / dt;
    for (int o = -1; o <= 1; ++o) {
      values[w.slot[i][static_cast<std::size_t>(o + 2)]] +=
          phys.surface_tension * si[static_cast<std::size_t>(o + 1)];
    }
    if (phys.bending_rigidity > 0.0) {
      for (int ok = -1; ok <= 1; ++ok) {
        const std::size_t k = (i + n + static_cast<std::size_t>(ok + 1) - 1) % n;
        const auto sk = s_row(k);
        const double weight = phys.bending_rigidity * si[static_cast<std::size_t>(ok + 1)] / w.mass[k];
        for (int oj = -1; oj <= 1; ++oj) {
          values[w.slot[i][static_cast<std::size_t>(ok + oj + 2)]] +=
              weight * sk[static_cast<std::size_t>(oj + 1)];
        }
      }
    }
  }
  if (!all_finite({values, static_cast<std::size_t>(w.geometric.nonZeros())})) {
    throw SolverDiverged("non-finite geometric system" + where(next_step, next_time), next_step,
                         next_time);
  }
  if (!w.analysed) {
    w.ldlt.analyzePattern(w.geometric);
    w.analysed = true;
  }
  w.ldlt.factorize(w.geometric);
  if (w.ldlt.info() != Eigen::Success) {
    throw SolverDiverged("geometric system factorisation failed" + where(next_step, next_time),
                         next_step, next_time);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    w.rhs_x[ii] = w.mass[i] * (x[i].x / dt + w.forcing[i] * normals[i].x);
    w.rhs_y[ii] = w.mass[i] * (x[i].y / dt + w.forcing[i] * normals[i].y);
  }
  w.sol_x = w.ldlt.solve(w.rhs_x);
  w.sol_y = w.ldlt.solve(w.rhs_y);

  std::vector<Vec2> moved(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    moved[i] = {w.sol_x[ii], w.sol_y[ii]};
    if (!std::isfinite(moved[i].x) || !std::isfinite(moved[i].y)) {
      throw SolverDiverged("non-finite vertex position" + where(next_step, next_time), next_step,
                           next_time);
    }
  }

  std::optional<Curve> next_curve;
  try {
    next_curve.emplace(std::move(moved), CurveCheck::skip_simplicity);
  } catch (const InvalidInput& e) {
    throw GeometricBreakdown(std::string("curve degenerated: ") + e.what() +
                                 where(next_step, next_time),
                             next_step, next_time);
  }
  if (config_.check_self_intersection && !is_simple(next_curve->vertices())) {
    throw GeometricBreakdown("curve self-intersects" + where(next_step, next_time), next_step,
                             next_time);
  }

  // Species on the moved mesh.
  w.new_lengths = edge_lengths(next_curve->vertices());
  w.new_mass = lumped_mass(w.new_lengths);
  w.reaction.assign(n_species, std::vector<double>(n));
  w.vertex_f.resize(n_species);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n_species; ++k) w.vertex_a[k] = a(k, i);
    model_.reaction(w.vertex_a, w.vertex_f);
    for (std::size_t k = 0; k < n_species; ++k) w.reaction[k][i] = w.vertex_f[k];
  }

  std::vector<std::vector<double>> next_species(n_species, std::vector<double>(n));
  w.sub.resize(n);
  w.diag.resize(n);
  w.sup.resize(n);
  w.rhs.resize(n);
  for (std::size_t k = 0; k < n_species; ++k) {
    const double d = phys.diffusion[k];
    for (std::size_t i = 0; i < n; ++i) {
      const double lm = w.new_lengths[(i + n - 1) % n];
      const double lp = w.new_lengths[i];
      w.sub[i] = -d / lm;
      w.sup[i] = -d / lp;
      w.diag[i] = w.new_mass[i] / dt + d / lm + d / lp;
      w.rhs[i] = w.mass[i] * a(k, i) / dt + w.new_mass[i] * w.reaction[k][i];
    }
    solve_cyclic_tridiagonal(w.sub, w.diag, w.sup, w.rhs, next_species[k], w.scratch);
    if (!all_finite(next_species[k])) {
      throw SolverDiverged("non-finite species concentration" + where(next_step, next_time),
                           next_step, next_time);
    }
  }

  VertexField next_fields(std::move(next_species));
  Curve curve = std::move(*next_curve);
  if (config_.remesh_enabled &&
      edge_length_ratio(curve.vertices()) > config_.remesh_ratio_threshold) {
    auto [c, f] = remesh_equal_arclength(curve, next_fields);
    curve = std::move(c);
    next_fields = std::move(f);
    ++remesh_events_;
  }
  state_ = SolverState(std::move(curve), std::move(next_fields), next_time, next_step,
                       state_.initial_area());
}

SolverState step(const SolverState& state, const SolverConfig& config, const Model& model) {
  ForwardSolver solver(state, config, model);
  solver.step();
  return solver.state();
}

Trajectory simulate(const Curve& curve, const VertexField& fields, const SolverConfig& config,
                    const Model& model, std::span<const double> observation_times) {
  config.validate();
  const double dt = config.dt;

  std::vector<double> times(observation_times.begin(), observation_times.end());
  if (times.empty() || std::abs(times.front()) > 0.5 * dt) times.insert(times.begin(), 0.0);
  std::vector<long> steps;
  bool warned = false;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const long k = std::lround(times[i] / dt);
    const double snapped = static_cast<double>(k) * dt;
    if (std::abs(snapped - times[i]) > 1e-9 * std::max(1.0, std::abs(times[i]))) {
      if (!warned) {
        std::clog << "cellfit: observation time " << times[i] << " is not a multiple of dt = " << dt
                  << ", snapping to " << snapped << '\n';
        warned = true;
      }
      times[i] = snapped;
    }
    if (!steps.empty() && k <= steps.back()) {
      throw InvalidInput("observation times must be increasing and at least dt apart");
    }
    steps.push_back(k);
  }
  if (steps.front() != 0) throw InvalidInput("first observation time must be 0");
  times.front() = 0.0;

  Trajectory traj;
  traj.dt = dt;
  traj.snapshots.push_back({0.0, curve, fields});
  ForwardSolver solver(SolverState(curve, fields, 0.0, 0), config, model);
  for (std::size_t i = 1; i < steps.size(); ++i) {
    while (solver.state().step_index() < steps[i]) solver.step();
    traj.snapshots.push_back({times[i], solver.state().curve(), solver.state().fields()});
  }
  traj.remesh_events = solver.remesh_events();
  return traj;
}

std::pair<Curve, VertexField> remesh_equal_arclength(const Curve& curve, const VertexField& fields) {
  const PointSpan x = curve.vertices();
  const std::size_t n = x.size();
  const auto lengths = edge_lengths(x);
  std::vector<double> arc(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) arc[i + 1] = arc[i] + lengths[i];
  const double total = arc[n];

  std::vector<Vec2> points(n);
  std::vector<std::vector<double>> species(fields.n_species(), std::vector<double>(n));
  std::size_t seg = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double target = total * static_cast<double>(k) / static_cast<double>(n);
    while (seg + 1 < n && arc[seg + 1] <= target) ++seg;
    const double t = std::clamp((target - arc[seg]) / lengths[seg], 0.0, 1.0);
    const std::size_t next = (seg + 1) % n;
    points[k] = x[seg] + (x[next] - x[seg]) * t;
    for (std::size_t s = 0; s < fields.n_species(); ++s) {
      species[s][k] = fields(s, seg) + t * (fields(s, next) - fields(s, seg));
    }
  }
  Curve resampled(std::move(points), CurveCheck::skip_simplicity);
  VertexField resampled_fields(std::move(species));

  const auto before = total_mass(curve, fields);
  const auto after = total_mass(resampled, resampled_fields);
  for (std::size_t s = 0; s < fields.n_species(); ++s) {
    if (after[s] != 0.0 && std::isfinite(before[s] / after[s])) {
      const double scale = before[s] / after[s];
      for (double& v : resampled_fields.species(s)) v *= scale;
    }
  }
  return {std::move(resampled), std::move(resampled_fields)};
}

std::vector<double> total_mass(const Curve& curve, const VertexField& fields) {
  const auto mass = lumped_mass(edge_lengths(curve.vertices()));
  std::vector<double> totals(fields.n_species(), 0.0);
  for (std::size_t s = 0; s < fields.n_species(); ++s) {
    for (std::size_t i = 0; i < mass.size(); ++i) totals[s] += mass[i] * fields(s, i);
  }
  return totals;
}

Curve make_initial_curve(const InitialShape& shape, std::size_t n_vertices) {
  std::vector<Vec2> points(n_vertices);
  const double two_pi = 2.0 * std::numbers::pi;
  switch (shape.kind) {
    case InitialShapeKind::unit_circle:
      for (std::size_t k = 0; k < n_vertices; ++k) {
        const double theta = two_pi * static_cast<double>(k) / static_cast<double>(n_vertices);
        points[k] = {std::cos(theta), std::sin(theta)};
      }
      break;
    case InitialShapeKind::capsule: {
      const double r = shape.radius;
      const double straight = shape.length - 2.0 * r;
      if (!(r > 0.0) || straight < 0.0) {
        throw InvalidInput("capsule needs radius > 0 and length >= 2 radius");
      }
      const double half = 0.5 * straight;
      const double cap = std::numbers::pi * r;
      const double total = 2.0 * straight + 2.0 * cap;
      // Arclength parametrisation starting at the right tip, counter-clockwise.
      for (std::size_t k = 0; k < n_vertices; ++k) {
        double s = total * static_cast<double>(k) / static_cast<double>(n_vertices);
        if (s < 0.5 * cap) {
          const double th = s / r;
          points[k] = {half + r * std::cos(th), r * std::sin(th)};
        } else if ((s -= 0.5 * cap) < straight) {
          points[k] = {half - s, r};
        } else if ((s -= straight) < cap) {
          const double th = 0.5 * std::numbers::pi + s / r;
          points[k] = {-half + r * std::cos(th), r * std::sin(th)};
        } else if ((s -= cap) < straight) {
          points[k] = {-half + s, -r};
        } else {
          s -= straight;
          const double th = -0.5 * std::numbers::pi + s / r;
          points[k] = {half + r * std::cos(th), r * std::sin(th)};
        }
      }
      break;
    }
  }
  return Curve(std::move(points));
}

VertexField make_initial_fields(const Curve& curve, const SpeciesRule& rule) {
  const std::size_t n = curve.size();
  return std::visit(
      [&](const auto& r) -> VertexField {
        using R = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<R, HomogeneousRule>) {
          std::vector<std::vector<double>> species;
          for (double v : r.values) species.emplace_back(n, v);
          return VertexField(std::move(species));
        } else if constexpr (std::is_same_v<R, SteadyStatePerturbationRule>) {
          const auto [a1, a2] = steady_state(r.gamma, r.k1, r.k2);
          VertexField f(2, n);
          for (std::size_t i = 0; i < n; ++i) {
            f(0, i) = a1;
            f(1, i) = a2 + 0.001 * std::max(0.0, -curve[i].x);
          }
          return f;
        } else {
          double lo = curve[0].x;
          double hi = curve[0].x;
          for (const Vec2& p : curve.vertices()) {
            lo = std::min(lo, p.x);
            hi = std::max(hi, p.x);
          }
          VertexField f(1, n);
          for (std::size_t i = 0; i < n; ++i) {
            const double s = (curve[i].x - lo) / (hi - lo);
            f(0, i) = r.low + (r.high - r.low) * std::pow(s, r.exponent);
          }
          return f;
        }
      },
      rule);
}

std::pair<Curve, VertexField> make_initial_data(const InitialShape& shape, std::size_t n_vertices,
                                                const SpeciesRule& rule) {
  Curve curve = make_initial_curve(shape, n_vertices);
  VertexField fields = make_initial_fields(curve, rule);
  return {std::move(curve), std::move(fields)};
}

}  // namespace cellfit
