#pragma once

// Box-constrained Levenberg-Marquardt on J(c) = 1/2 chi(c)^T chi(c) with
// finite-difference Jacobians. The iteration runs in rescaled coordinates
// u_j = c_j / s_j, so damping and stopping tests see parameters of unit size.

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cellfit/objective.hpp"

namespace cellfit {

using ResidualFunction = std::function<ResidualVector(std::span<const double>)>;

struct Box {
  std::vector<double> lower;
  std::vector<double> upper;

  std::size_t size() const noexcept { return lower.size(); }
  bool contains(std::span<const double> c) const;
  std::vector<double> project(std::span<const double> c) const;

  static Box unbounded(std::size_t n);
  // [0, factor t] for t > 0 and [factor t, 0] for t < 0.
  static Box sign_preserving(std::span<const double> reference, double factor = 3.0);
};

enum class ScalingReference { initial_guess, provided_values };

struct LMOptions {
  double fd_step = 5e-3;          // h_LM
  double stop_gradient = 1e-6;    // on ||J^T chi||_inf
  double stop_update = 1e-6;      // on ||delta||_2
  double stop_error = 1e-6;       // on ||chi||_2
  std::size_t max_iterations = 100;
  double damping_init_factor = 1e-3;
  ScalingReference scaling_reference = ScalingReference::initial_guess;
  std::vector<double> scale;      // used with provided_values
  bool central_differences = false;
  std::size_t max_rejections = 20;
  std::size_t threads = 1;        // 0: hardware concurrency

  void validate() const;
};

enum class Termination { small_error, small_gradient, small_update, max_iterations };

std::string to_string(Termination t);

struct IterateRecord {
  std::size_t iteration = 0;
  std::vector<double> c;
  double objective = 0.0;
  double position = 0.0;
  double concentration = 0.0;
  double mu = 0.0;
  bool accepted = false;
  std::size_t evaluations = 0;  // cumulative
};

struct RelativeError {
  double percent = 0.0;   // |c - c_true| / |c_true| * 100
  double absolute = 0.0;  // |c - c_true|
  bool zero_truth = false;
};

struct LMResult {
  std::vector<double> c;
  Termination termination = Termination::max_iterations;
  std::size_t iterations = 0;  // accepted steps
  std::vector<IterateRecord> iterates;
  std::size_t function_evaluations = 0;
  double objective = 0.0;
  ResidualVector residual;
  std::vector<RelativeError> relative_errors;  // filled when c_true is given
};

struct FdJacobian {
  Eigen::MatrixXd jacobian;  // d chi / d c
  std::vector<bool> flagged;
  std::size_t evaluations = 0;
};

// Column j from (chi(c + h s_j e_j) - chi(c)) / (actual step), stepping
// backwards when the forward point leaves the box. Columns whose evaluation
// fails are zeroed and flagged; more than half flagged throws OptimizerError.
FdJacobian fd_jacobian(const ResidualFunction& fn, std::span<const double> c,
                       const ResidualVector& chi_c, std::span<const double> scale, double h,
                       const Box& box, bool central = false, std::size_t threads = 1);

LMResult lm_solve(const ResidualFunction& fn, std::span<const double> c0, const Box& box,
                  const LMOptions& options, std::span<const double> c_true = {});

std::vector<RelativeError> relative_error_report(std::span<const double> c,
                                                 std::span<const double> c_true);

}  // namespace cellfit
