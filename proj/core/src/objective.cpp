#include "cellfit/objective.hpp"

#include <cmath>

#include "cellfit/errors.hpp"

namespace cellfit {

ResidualVector ResidualVector::sentinel(std::size_t n_snapshots, std::string reason) {
  ResidualVector r;
  r.chi.assign(2 * n_snapshots, failure_sentinel);
  r.n_snapshots = n_snapshots;
  r.failed = true;
  r.failure = std::move(reason);
  return r;
}

double objective_value(std::span<const double> chi) {
  double sum = 0.0;
  for (double v : chi) sum += v * v;
  return 0.5 * sum;
}

ObjectiveValue objective_split(const ResidualVector& r) {
  ObjectiveValue v;
  v.position = objective_value(r.position());
  v.concentration = objective_value(r.concentration());
  v.total = objective_value(r.chi);
  return v;
}

WeightVector::WeightVector(std::vector<double> w) : w_(std::move(w)) {
  if (w_.empty() || w_.size() % 2 != 0) {
    throw InvalidInput("weight vector must have 2 n_s entries");
  }
  for (double v : w_) {
    if (!std::isfinite(v) || !(v > 0.0)) throw InvalidInput("weights must be finite and positive");
  }
}

WeightVector WeightVector::ones(std::size_t n_snapshots) {
  return WeightVector(std::vector<double>(2 * n_snapshots, 1.0));
}

WeightVector WeightVector::alpha(std::size_t n_snapshots, double alpha) {
  std::vector<double> w(2 * n_snapshots, 1.0);
  for (std::size_t i = n_snapshots; i < w.size(); ++i) w[i] = alpha;
  return WeightVector(std::move(w));
}

WeightVector WeightVector::balanced(const ResidualVector& unit_weight_reference) {
  if (unit_weight_reference.failed) {
    throw InvalidInput("cannot balance weights on a failed forward solve");
  }
  const ObjectiveValue split = objective_split(unit_weight_reference);
  if (!(split.position > 0.0) || !(split.concentration > 0.0)) {
    throw InvalidInput(
        "cannot balance weights: position or concentration error vanishes at the reference");
  }
  return alpha(unit_weight_reference.n_snapshots, split.position / split.concentration);
}

namespace {

double l1_difference(const VertexField& a, std::size_t i, const VertexField& b, std::size_t j) {
  double sum = 0.0;
  for (std::size_t k = 0; k < a.n_species(); ++k) sum += std::abs(a(k, i) - b(k, j));
  return sum;
}

void check_alignment(const Trajectory& traj, const ObservationSet& obs, const WeightVector& w) {
  if (traj.snapshots.size() != obs.snapshots.size()) {
    throw InvalidInput("trajectory has " + std::to_string(traj.snapshots.size()) +
                       " snapshots, observations have " + std::to_string(obs.snapshots.size()));
  }
  const double tol = traj.dt > 0.0 ? 0.5 * traj.dt : 1e-12;
  for (std::size_t i = 0; i < obs.snapshots.size(); ++i) {
    if (std::abs(traj.snapshots[i].time - obs.snapshots[i].time) > tol) {
      throw InvalidInput("snapshot " + std::to_string(i) + ": simulated time " +
                         std::to_string(traj.snapshots[i].time) + " does not match observed " +
                         std::to_string(obs.snapshots[i].time));
    }
    if (traj.snapshots[i].fields.n_species() != obs.snapshots[i].fields.n_species()) {
      throw InvalidInput("snapshot " + std::to_string(i) + ": species counts differ");
    }
  }
  if (w.n_snapshots() != obs.n_fit()) {
    throw InvalidInput("weight vector has " + std::to_string(w.size()) + " entries, expected " +
                       std::to_string(2 * obs.n_fit()));
  }
}

template <class Mismatch>
ResidualVector assemble(const Trajectory& traj, const ObservationSet& obs, const WeightVector& w,
                        Mismatch&& mismatch) {
  check_alignment(traj, obs, w);
  const std::size_t ns = obs.n_fit();
  ResidualVector r;
  r.n_snapshots = ns;
  r.chi.resize(2 * ns);
  for (std::size_t i = 0; i < ns; ++i) {
    const Snapshot& s = traj.snapshots[i + 1];
    const ObsSnapshot& o = obs.snapshots[i + 1];
    const SnapshotMismatch m = mismatch(s.curve.vertices(), s.fields, PointSpan(o.points), o.fields);
    r.chi[i] = std::sqrt(w[i]) * m.position;
    r.chi[i + ns] = std::sqrt(w[i + ns]) * m.concentration;
  }
  return r;
}

}  // namespace

SnapshotMismatch sharp_mismatch(PointSpan computed, const VertexField& computed_fields,
                                PointSpan observed, const VertexField& observed_fields) {
  const PointIndex computed_index(computed);
  const PointIndex observed_index(observed);
  const bool has_species = computed_fields.n_species() > 0;

  double pos_a = 0.0;
  double conc_a = 0.0;
  for (std::size_t j = 0; j < computed.size(); ++j) {
    const NearestPoint hit = observed_index.nearest(computed[j]);
    pos_a += hit.distance;
    if (has_species) conc_a += l1_difference(computed_fields, j, observed_fields, hit.index);
  }
  double pos_b = 0.0;
  double conc_b = 0.0;
  for (std::size_t k = 0; k < observed.size(); ++k) {
    const NearestPoint hit = computed_index.nearest(observed[k]);
    pos_b += hit.distance;
    if (has_species) conc_b += l1_difference(observed_fields, k, computed_fields, hit.index);
  }
  const auto nc = static_cast<double>(computed.size());
  const auto no = static_cast<double>(observed.size());
  return {pos_a / nc + pos_b / no, conc_a / nc + conc_b / no};
}

ResidualVector sharp_residuals(const Trajectory& traj, const ObservationSet& obs,
                               const WeightVector& w) {
  return assemble(traj, obs, w, [](auto&&... args) { return sharp_mismatch(args...); });
}

ResidualVector phase_field_residuals(const Trajectory& traj, const ObservationSet& obs,
                                     const WeightVector& w, double epsilon,
                                     double cells_per_epsilon) {
  if (!obs.all_ordered()) {
    throw InvalidInput(
        "phase-field residuals need ordered observations to build a signed distance; use the "
        "sharp form for unordered point clouds");
  }
  return assemble(traj, obs, w, [&](auto&&... args) {
    return phase_field_mismatch(args..., epsilon, cells_per_epsilon);
  });
}

ResidualVector residuals(const Trajectory& traj, const ObservationSet& obs, const WeightVector& w,
                         const ObjectiveOptions& options) {
  if (options.form == ObjectiveForm::sharp) return sharp_residuals(traj, obs, w);
  return phase_field_residuals(traj, obs, w, options.epsilon, options.cells_per_epsilon);
}

namespace {

Curve initial_curve_from(const ObservationSet& obs) {
  obs.validate();
  const ObsSnapshot& first = obs.snapshots.front();
  if (!first.ordered) {
    throw InvalidInput("the initial observation must be ordered to serve as initial data");
  }
  return Curve(first.points);
}

}  // namespace

ResidualProblem::ResidualProblem(ModelSpec spec, SolverConfig config, ObservationSet obs,
                                 WeightVector w, ObjectiveOptions options)
    : spec_(std::move(spec)),
      config_(std::move(config)),
      obs_(std::move(obs)),
      w_(std::move(w)),
      options_(options),
      initial_curve_(initial_curve_from(obs_)),
      times_(obs_.times()) {
  spec_.validate();
  config_.validate();
  if (obs_.n_species() != spec_.physics.diffusion.size()) {
    throw InvalidInput("observations carry " + std::to_string(obs_.n_species()) +
                       " species, the model has " + std::to_string(spec_.physics.diffusion.size()));
  }
  if (w_.n_snapshots() != obs_.n_fit()) {
    throw InvalidInput("weight vector length does not match 2 n_s");
  }
  if (options_.form == ObjectiveForm::phase_field) {
    if (!obs_.all_ordered()) {
      throw InvalidInput(
          "phase-field residuals need ordered observations; use the sharp form instead");
    }
    if (!(options_.epsilon > 0.0)) throw InvalidInput("epsilon must be positive");
  }
}

void ResidualProblem::set_weights(WeightVector w) {
  if (w.n_snapshots() != obs_.n_fit()) {
    throw InvalidInput("weight vector length does not match 2 n_s");
  }
  w_ = std::move(w);
}

Trajectory ResidualProblem::simulate(std::span<const double> c) const {
  const Model model = bind_parameters(spec_, c);
  return cellfit::simulate(initial_curve_, obs_.snapshots.front().fields, config_, model, times_);
}

ResidualVector ResidualProblem::operator()(std::span<const double> c) const {
  Trajectory traj;
  try {
    traj = simulate(c);
  } catch (const SolverError& e) {
    return ResidualVector::sentinel(obs_.n_fit(), e.what());
  }
  return residuals(traj, obs_, w_, options_);
}

}  // namespace cellfit
