#pragma once

// Experiment configuration for the cellfit command line tool. Defaults
// reproduce the forced-curve experiment: Schnakenberg kinetics with
// proportional forcing, N = 128, dt = 1e-2, observations at t = 0, 1, ..., 10,
// sharp objective with unit weights, and the Levenberg-Marquardt settings
// h = 5e-3 and tolerances 1e-6.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cellfit/data_io.hpp"
#include "cellfit/forward_solver.hpp"
#include "cellfit/objective.hpp"
#include "cellfit/optimizer.hpp"

namespace cellfit::cli {

enum class WeightPreset { ones, alpha, balanced, explicit_values };

struct WeightConfig {
  WeightPreset preset = WeightPreset::ones;
  double alpha = 1.0;
  std::vector<double> values;
};

struct DataConfig {
  std::optional<std::filesystem::path> observations;  // generated from c_true when absent
  std::vector<double> observation_times;
  std::vector<NoiseDistribution> noise_distributions{NoiseDistribution::normal};
  std::vector<double> noise_levels{0.0};
  std::size_t replications = 1;
  std::uint64_t seed = 1;
};

struct ScanConfig {
  std::vector<std::string> parameters;  // two slot names among the free parameters
  double relative_range = 0.25;
  std::size_t points = 33;
  std::vector<double> alphas{1.0};
  std::vector<double> epsilons;  // phase-field sweep; empty: objective epsilon
  std::vector<ObjectiveForm> forms;  // empty: the objective form
};

struct ExperimentConfig {
  SolverConfig forward;
  InitialShape shape;
  SpeciesRule species_rule = SteadyStatePerturbationRule{};
  ModelSpec model;
  std::vector<double> initial_guess;
  std::optional<std::vector<double>> true_values;
  Box box;
  ObjectiveOptions objective;
  WeightConfig weights;
  LMOptions optimizer;
  DataConfig data;
  ScanConfig scan;
  std::filesystem::path output = "cellfit-run";
  std::filesystem::path base_directory = ".";
};

// Parses and validates. Throws ParseError for syntax problems and
// InvalidInput for semantic ones; unknown keys are rejected.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_directory);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace cellfit::cli
