#pragma once

// Subcommands of the cellfit tool. Each writes its artifacts to the output
// directory and a human-readable summary to `out`, and returns the process
// exit code.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cellfit/cli/config.hpp"

namespace cellfit::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_config_error = 2;
inline constexpr int exit_forward_failure = 3;
inline constexpr int exit_not_converged = 4;

struct RunOptions {
  std::optional<std::filesystem::path> output;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
};

struct PreparedData {
  Curve initial_curve;
  VertexField initial_fields;
  ObservationSet clean;  // noiseless observations (generated or loaded)
};

// Generates targets from the true values, or loads the observations file.
PreparedData prepare_data(const ExperimentConfig& cfg);

WeightVector make_weights(const ExperimentConfig& cfg, const ResidualProblem& unit_weight_problem);

// Builds the residual problem for `obs` and runs Levenberg-Marquardt from the
// configured initial guess.
LMResult run_identification(const ExperimentConfig& cfg, const ObservationSet& obs,
                            std::size_t threads);

struct ScanCell {
  std::string form;
  double epsilon = 0.0;
  double alpha = 1.0;
  double p1 = 0.0;
  double p2 = 0.0;
  bool ok = false;
  double objective = 0.0;
  double position = 0.0;
  double concentration = 0.0;
};

// Evaluates J on the configured grid; one forward solve per grid point is
// shared by every (form, epsilon, alpha) combination.
std::vector<ScanCell> run_scan(const ExperimentConfig& cfg, const ObservationSet& obs,
                               const std::vector<ObjectiveForm>& forms, std::size_t threads);

int cmd_simulate(const ExperimentConfig& cfg, const RunOptions& options, std::ostream& out);
int cmd_identify(const ExperimentConfig& cfg, const RunOptions& options, std::ostream& out);
int cmd_perturb(const ExperimentConfig& cfg, const RunOptions& options, std::ostream& out);
int cmd_scan(const ExperimentConfig& cfg, const RunOptions& options, std::ostream& out);
int cmd_report(const std::filesystem::path& run_directory, std::ostream& out);

}  // namespace cellfit::cli
