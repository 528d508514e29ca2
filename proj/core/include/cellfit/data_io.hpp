#pragma once

// Observation persistence (JSON), synthetic targets and the observation noise
// model.
//
// Observation schema:
//   {"times": [t0, ...],
//    "snapshots": [{"t": t, "points": [[x, y], ...], "ordered": true,
//                   "fields": [[species 1 ...], [species 2 ...]]}, ...],
//    "metadata": {"c_true": [...], "parameter_names": [...], "seed": s,
//                 "units": "...", "rng": "..."}}
// Metadata entries are optional.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

#include "cellfit/forward_solver.hpp"
#include "cellfit/observations.hpp"

namespace cellfit {

ObservationSet observations_from_trajectory(const Trajectory& traj);

// Simulates from (curve, fields) with c_true bound into the model and returns
// ordered observations with c_true recorded in the metadata.
ObservationSet generate_targets(const ModelSpec& spec, const SolverConfig& config,
                                std::span<const double> c_true, const Curve& curve,
                                const VertexField& fields, std::span<const double> times);

// Doubles are written in shortest round-trip form, so save then load
// reproduces every value bit for bit.
std::string observations_to_json(const ObservationSet& obs);
ObservationSet observations_from_json(const std::string& text);
void save_observations(const ObservationSet& obs, const std::filesystem::path& path);
ObservationSet load_observations(const std::filesystem::path& path);

// {"dt": dt, "remesh_events": n, "times": [...],
//  "snapshots": [{"t": t, "vertices": [[x, y], ...], "fields": [[...], ...]}]}
std::string trajectory_to_json(const Trajectory& traj);
void save_trajectory(const Trajectory& traj, const std::filesystem::path& path);

enum class NoiseDistribution { normal, uniform };

struct NoiseSpec {
  NoiseDistribution distribution = NoiseDistribution::normal;
  double standard_deviation = 0.0;  // k_n
  std::uint64_t seed = 0;
};

inline constexpr const char* noise_rng_name = "philox4x64-10";

// Perturbs every coordinate and species value of snapshots 1..n_s by
// eta * (max - min of that quantity over the clean snapshot), with eta of
// mean zero and standard deviation k_n. The draw for (snapshot i, point k,
// component q) is a pure function of (seed, i, k, q); components are x, y,
// then the species in order.
ObservationSet add_noise(const ObservationSet& obs, const NoiseSpec& spec);

// Single draw with the given distribution and unit standard deviation.
double noise_draw(NoiseDistribution distribution, std::uint64_t seed, std::uint64_t snapshot,
                  std::uint64_t point, std::uint64_t component);

}  // namespace cellfit
