#include "cellfit/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cellfit/errors.hpp"
#include "cellfit/parallel.hpp"

namespace cellfit {

bool Box::contains(std::span<const double> c) const {
  if (c.size() != size()) return false;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (!(c[i] >= lower[i] && c[i] <= upper[i])) return false;
  }
  return true;
}

std::vector<double> Box::project(std::span<const double> c) const {
  std::vector<double> out(c.begin(), c.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(out[i], lower[i], upper[i]);
  return out;
}

Box Box::unbounded(std::size_t n) {
  const double inf = std::numeric_limits<double>::infinity();
  return {std::vector<double>(n, -inf), std::vector<double>(n, inf)};
}

Box Box::sign_preserving(std::span<const double> reference, double factor) {
  Box box;
  for (double t : reference) {
    if (t == 0.0 || !std::isfinite(t)) {
      throw InvalidInput("sign-preserving box needs finite nonzero reference values");
    }
    box.lower.push_back(t > 0.0 ? 0.0 : factor * t);
    box.upper.push_back(t > 0.0 ? factor * t : 0.0);
  }
  return box;
}

void LMOptions::validate() const {
  if (!(fd_step > 0.0)) throw InvalidInput("fd_step must be positive");
  if (!(stop_gradient > 0.0) || !(stop_update > 0.0) || !(stop_error > 0.0)) {
    throw InvalidInput("stopping tolerances must be positive");
  }
  if (!(damping_init_factor > 0.0)) throw InvalidInput("damping_init_factor must be positive");
  if (scaling_reference == ScalingReference::provided_values) {
    for (double s : scale) {
      if (s == 0.0 || !std::isfinite(s)) throw InvalidInput("scale values must be finite and nonzero");
    }
  }
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::small_error: return "small_error";
    case Termination::small_gradient: return "small_gradient";
    case Termination::small_update: return "small_update";
    case Termination::max_iterations: return "max_iterations";
  }
  return "unknown";
}

FdJacobian fd_jacobian(const ResidualFunction& fn, std::span<const double> c,
                       const ResidualVector& chi_c, std::span<const double> scale, double h,
                       const Box& box, bool central, std::size_t threads) {
  const std::size_t n = c.size();
  const std::size_t m = chi_c.chi.size();
  if (chi_c.failed) throw OptimizerError("Jacobian requested at a failed residual evaluation");
  if (scale.size() != n || box.size() != n) {
    throw InvalidInput("scale and box must match the parameter count");
  }
  FdJacobian out;
  out.jacobian = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  std::vector<char> flagged(n, 0);
  std::vector<std::size_t> evals(n, 0);

  parallel_for(n, threads, [&](std::size_t j) {
    const double step = h * std::abs(scale[j]);
    auto column = out.jacobian.col(static_cast<Eigen::Index>(j));
    auto usable = [&](const ResidualVector& r) { return !r.failed && r.chi.size() == m; };

    if (central && c[j] - step >= box.lower[j] && c[j] + step <= box.upper[j]) {
      std::vector<double> cp(c.begin(), c.end());
      std::vector<double> cm(c.begin(), c.end());
      cp[j] += step;
      cm[j] -= step;
      const ResidualVector rp = fn(cp);
      const ResidualVector rm = fn(cm);
      evals[j] = 2;
      if (!usable(rp) || !usable(rm)) {
        flagged[j] = 1;
        return;
      }
      const double width = cp[j] - cm[j];
      for (std::size_t i = 0; i < m; ++i) {
        column[static_cast<Eigen::Index>(i)] = (rp.chi[i] - rm.chi[i]) / width;
      }
      return;
    }

    std::vector<double> cp(c.begin(), c.end());
    cp[j] = c[j] + step;
    if (cp[j] > box.upper[j]) {
      cp[j] = c[j] - step;
      if (cp[j] < box.lower[j]) {
        cp[j] = box.upper[j] - c[j] >= c[j] - box.lower[j] ? box.upper[j] : box.lower[j];
      }
    }
    const double actual = cp[j] - c[j];
    if (actual == 0.0) {
      flagged[j] = 1;
      return;
    }
    const ResidualVector r = fn(cp);
    evals[j] = 1;
    if (!usable(r)) {
      flagged[j] = 1;
      return;
    }
    for (std::size_t i = 0; i < m; ++i) {
      column[static_cast<Eigen::Index>(i)] = (r.chi[i] - chi_c.chi[i]) / actual;
    }
  });

  std::size_t n_flagged = 0;
  for (std::size_t j = 0; j < n; ++j) {
    out.flagged.push_back(flagged[j] != 0);
    n_flagged += flagged[j];
    out.evaluations += evals[j];
  }
  if (2 * n_flagged > n) {
    std::string which;
    for (std::size_t j = 0; j < n; ++j) {
      if (flagged[j]) which += (which.empty() ? "" : ", ") + std::to_string(j);
    }
    throw OptimizerError("finite-difference Jacobian: forward solve failed for parameter(s) " +
                         which + "; the perturbed points may lie outside the stable range");
  }
  return out;
}

namespace {

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

IterateRecord make_record(std::size_t iteration, std::span<const double> c, const ResidualVector& r,
                          double mu, bool accepted, std::size_t evaluations) {
  IterateRecord rec;
  rec.iteration = iteration;
  rec.c.assign(c.begin(), c.end());
  if (2 * r.n_snapshots == r.chi.size() && r.n_snapshots > 0) {
    const ObjectiveValue v = objective_split(r);
    rec.objective = v.total;
    rec.position = v.position;
    rec.concentration = v.concentration;
  } else {
    rec.objective = objective_value(r.chi);
    rec.position = rec.objective;
  }
  rec.mu = mu;
  rec.accepted = accepted;
  rec.evaluations = evaluations;
  return rec;
}

}  // namespace

LMResult lm_solve(const ResidualFunction& fn, std::span<const double> c0, const Box& box,
                  const LMOptions& options, std::span<const double> c_true) {
  options.validate();
  const std::size_t n = c0.size();
  if (n == 0) throw InvalidInput("no free parameters");
  if (box.size() != n) throw InvalidInput("box does not match the parameter count");
  if (!box.contains(c0)) throw InvalidInput("initial guess lies outside the box");

  std::vector<double> scale(n);
  if (options.scaling_reference == ScalingReference::provided_values) {
    if (options.scale.size() != n) throw InvalidInput("scale must have one entry per parameter");
    for (std::size_t j = 0; j < n; ++j) scale[j] = std::abs(options.scale[j]);
  } else {
    for (std::size_t j = 0; j < n; ++j) scale[j] = c0[j] != 0.0 ? std::abs(c0[j]) : 1.0;
  }
  const Eigen::Map<const Eigen::VectorXd> s(scale.data(), static_cast<Eigen::Index>(n));

  LMResult result;
  std::vector<double> c(c0.begin(), c0.end());
  ResidualVector r = fn(c);
  std::size_t evals = 1;
  if (r.failed) {
    throw OptimizerError("residual evaluation failed at the initial guess: " + r.failure);
  }
  const std::size_t m = r.chi.size();
  if (m < n) {
    throw InvalidInput("fewer residuals (" + std::to_string(m) + ") than parameters (" +
                       std::to_string(n) + ")");
  }
  double objective = objective_value(r.chi);
  result.iterates.push_back(make_record(0, c, r, 0.0, true, evals));

  auto finish = [&](Termination t) {
    result.c = c;
    result.termination = t;
    result.function_evaluations = evals;
    result.objective = objective;
    result.residual = r;
    if (!c_true.empty()) result.relative_errors = relative_error_report(c, c_true);
    return result;
  };

  if (norm2(r.chi) < options.stop_error) return finish(Termination::small_error);

  Eigen::MatrixXd ju;
  Eigen::VectorXd g;
  auto linearise = [&] {
    const FdJacobian jac = fd_jacobian(fn, c, r, scale, options.fd_step, box,
                                       options.central_differences, options.threads);
    evals += jac.evaluations;
    ju = jac.jacobian * s.asDiagonal();
    const Eigen::Map<const Eigen::VectorXd> chi(r.chi.data(), static_cast<Eigen::Index>(m));
    g = ju.transpose() * chi;
  };
  linearise();
  Eigen::MatrixXd jtj = ju.transpose() * ju;
  double mu = options.damping_init_factor * jtj.diagonal().maxCoeff();
  if (!(mu > 0.0)) mu = options.damping_init_factor;

  std::size_t iteration = 0;
  while (true) {
    if (g.lpNorm<Eigen::Infinity>() < options.stop_gradient) {
      return finish(Termination::small_gradient);
    }
    if (iteration >= options.max_iterations) return finish(Termination::max_iterations);
    ++iteration;

    jtj = ju.transpose() * ju;
    bool accepted = false;
    for (std::size_t rejections = 0; rejections < options.max_rejections; ++rejections) {
      Eigen::MatrixXd damped = jtj;
      damped.diagonal().array() += mu;
      const Eigen::LDLT<Eigen::MatrixXd> ldlt(damped);
      Eigen::VectorXd delta = ldlt.solve(-g);
      if (ldlt.info() != Eigen::Success || !delta.allFinite()) {
        mu *= 2.0;
        continue;
      }
      std::vector<double> trial(n);
      for (std::size_t j = 0; j < n; ++j) {
        trial[j] = c[j] + scale[j] * delta[static_cast<Eigen::Index>(j)];
      }
      trial = box.project(trial);
      double step_norm = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double d = (trial[j] - c[j]) / scale[j];
        step_norm += d * d;
      }
      if (std::sqrt(step_norm) < options.stop_update) return finish(Termination::small_update);

      ResidualVector rt = fn(trial);
      ++evals;
      const double jt = rt.failed ? std::numeric_limits<double>::infinity() : objective_value(rt.chi);
      if (!rt.failed && rt.chi.size() == m && jt < objective) {
        c = std::move(trial);
        r = std::move(rt);
        objective = jt;
        mu /= 3.0;
        result.iterates.push_back(make_record(iteration, c, r, mu, true, evals));
        accepted = true;
        break;
      }
      result.iterates.push_back(make_record(iteration, trial, rt, mu, false, evals));
      mu *= 2.0;
    }
    if (!accepted) return finish(Termination::small_update);
    result.iterations = iteration;
    if (norm2(r.chi) < options.stop_error) return finish(Termination::small_error);
    linearise();
  }
}

std::vector<RelativeError> relative_error_report(std::span<const double> c,
                                                 std::span<const double> c_true) {
  if (c.size() != c_true.size()) throw InvalidInput("c and c_true differ in length");
  std::vector<RelativeError> out(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    out[i].absolute = std::abs(c[i] - c_true[i]);
    if (c_true[i] == 0.0) {
      out[i].zero_truth = true;
      out[i].percent = std::numeric_limits<double>::quiet_NaN();
    } else {
      out[i].percent = out[i].absolute / std::abs(c_true[i]) * 100.0;
    }
  }
  return out;
}

}  // namespace cellfit
