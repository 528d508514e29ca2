#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <random>

#include "cellfit/errors.hpp"
#include "cellfit/optimizer.hpp"

using namespace cellfit;

namespace {

ResidualVector wrap(std::vector<double> chi) {
  ResidualVector r;
  r.n_snapshots = chi.size() / 2;
  r.chi = std::move(chi);
  return r;
}

ResidualFunction rosenbrock() {
  return [](std::span<const double> c) {
    return wrap({10.0 * (c[1] - c[0] * c[0]), 1.0 - c[0]});
  };
}

// chi = A c - b with A 6x3.
struct LinearProblem {
  Eigen::MatrixXd a{6, 3};
  Eigen::VectorXd b{6};

  LinearProblem() {
    a << 1, 2, 0, 0, 1, -1, 3, 0, 1, 1, 1, 1, -2, 0.5, 0, 0, 0, 4;
    b << 1, -2, 0.5, 3, 1, -1;
  }
  ResidualFunction fn() const {
    return [this](std::span<const double> c) {
      const Eigen::Map<const Eigen::VectorXd> x(c.data(), 3);
      const Eigen::VectorXd r = a * x - b;
      return wrap({r.data(), r.data() + r.size()});
    };
  }
  Eigen::VectorXd solution() const { return (a.transpose() * a).ldlt().solve(a.transpose() * b); }
};

}  // namespace

TEST(Optimizer, ForwardDifferenceOfLinearMapIsExact) {
  const LinearProblem p;
  const std::vector<double> c{0.3, -1.0, 2.0};
  const std::vector<double> scale{1.0, 1.0, 1.0};
  const FdJacobian j = fd_jacobian(p.fn(), c, p.fn()(c), scale, 1e-3, Box::unbounded(3));
  EXPECT_EQ(j.evaluations, 3u);
  EXPECT_LT((j.jacobian - p.a).lpNorm<Eigen::Infinity>(), 1e-10);
}

// For chi_i = c_i^2 the forward quotient is 2 c + step with step = h |s|.
TEST(Optimizer, ForwardDifferenceUsesScaledStep) {
  const ResidualFunction fn = [](std::span<const double> c) { return wrap({c[0] * c[0], c[1] * c[1]}); };
  const std::vector<double> c{2.0, -0.5};
  const std::vector<double> scale{4.0, 0.1};
  const double h = 1e-3;
  const FdJacobian j = fd_jacobian(fn, c, fn(c), scale, h, Box::unbounded(2));
  EXPECT_NEAR(j.jacobian(0, 0), 2.0 * 2.0 + h * 4.0, 1e-9);
  EXPECT_NEAR(j.jacobian(1, 1), 2.0 * -0.5 + h * 0.1, 1e-9);
  EXPECT_EQ(j.jacobian(0, 1), 0.0);
}

TEST(Optimizer, BackwardStepAtUpperBound) {
  const ResidualFunction fn = [](std::span<const double> c) { return wrap({c[0] * c[0], 0.0}); };
  const std::vector<double> c{1.0};
  const Box box{{0.0}, {1.0}};
  const FdJacobian j = fd_jacobian(fn, c, fn(c), std::vector<double>{1.0}, 1e-2, box);
  EXPECT_NEAR(j.jacobian(0, 0), 2.0 - 1e-2, 1e-12);
}

TEST(Optimizer, CentralDifferencesAreSecondOrder) {
  const ResidualFunction fn = [](std::span<const double> c) {
    return wrap({std::sin(c[0]) * std::exp(c[1]), c[0] * c[0] * c[1]});
  };
  const std::vector<double> c{0.7, 0.3};
  const std::vector<double> scale{1.0, 1.0};
  Eigen::MatrixXd exact(2, 2);
  exact << std::cos(0.7) * std::exp(0.3), std::sin(0.7) * std::exp(0.3), 2 * 0.7 * 0.3, 0.7 * 0.7;
  auto error = [&](double h, bool central) {
    const FdJacobian j = fd_jacobian(fn, c, fn(c), scale, h, Box::unbounded(2), central);
    return (j.jacobian - exact).lpNorm<Eigen::Infinity>();
  };
  const double f1 = error(1e-2, false), f2 = error(5e-3, false);
  const double c1 = error(1e-2, true), c2 = error(5e-3, true);
  EXPECT_NEAR(f1 / f2, 2.0, 0.1);
  EXPECT_NEAR(c1 / c2, 4.0, 0.2);
  EXPECT_LT(c1, f1 / 10.0);
}

TEST(Optimizer, FailedColumnsAreFlaggedAndAbortBeyondHalf) {
  // Fails whenever any coordinate exceeds 1.
  auto guarded = [](std::size_t n_bad_limit) {
    return [n_bad_limit](std::span<const double> c) {
      for (std::size_t j = 0; j < n_bad_limit; ++j) {
        if (c[j] > 1.0) return ResidualVector::sentinel(2, "blown up");
      }
      return wrap({c[0], c[1], c[2], 0.0});
    };
  };
  const std::vector<double> c{1.0, 1.0, 1.0};
  const std::vector<double> scale{1.0, 1.0, 1.0};
  const FdJacobian one = fd_jacobian(guarded(1), c, guarded(1)(c), scale, 1e-3, Box::unbounded(3));
  EXPECT_EQ(one.flagged, (std::vector<bool>{true, false, false}));
  EXPECT_EQ(one.jacobian.col(0).norm(), 0.0);
  EXPECT_NEAR(one.jacobian(1, 1), 1.0, 1e-12);
  EXPECT_THROW(fd_jacobian(guarded(2), c, guarded(2)(c), scale, 1e-3, Box::unbounded(3)),
               OptimizerError);
  EXPECT_THROW(fd_jacobian(guarded(1), c, ResidualVector::sentinel(2, "x"), scale, 1e-3,
                           Box::unbounded(3)),
               OptimizerError);
}

TEST(Optimizer, LinearLeastSquaresConvergesQuickly) {
  const LinearProblem p;
  LMOptions opt;
  opt.stop_gradient = 1e-10;
  const LMResult r = lm_solve(p.fn(), std::vector<double>{1.0, 1.0, 1.0}, Box::unbounded(3), opt);
  const Eigen::VectorXd x = p.solution();
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(r.c[static_cast<std::size_t>(j)], x[j], 1e-8);
  EXPECT_LE(r.iterations, 4u);
  EXPECT_TRUE(r.termination == Termination::small_gradient ||
              r.termination == Termination::small_update);
}

TEST(Optimizer, RosenbrockReachesMinimum) {
  LMOptions opt;
  opt.fd_step = 1e-7;
  opt.stop_error = 1e-10;
  opt.stop_gradient = 1e-14;
  opt.stop_update = 1e-14;
  opt.max_iterations = 200;
  const std::vector<double> c0{-1.2, 1.0};
  const LMResult r = lm_solve(rosenbrock(), c0, Box::unbounded(2), opt, std::vector<double>{1.0, 1.0});
  EXPECT_EQ(r.termination, Termination::small_error);
  EXPECT_NEAR(r.c[0], 1.0, 1e-8);
  EXPECT_NEAR(r.c[1], 1.0, 1e-8);
  ASSERT_EQ(r.relative_errors.size(), 2u);
  EXPECT_LT(r.relative_errors[0].percent, 1e-6);

  // J never increases over accepted iterates.
  double last = INFINITY;
  for (const IterateRecord& it : r.iterates) {
    if (!it.accepted) continue;
    EXPECT_LT(it.objective, last);
    last = it.objective;
  }
}

TEST(Optimizer, IteratesStayInsideBox) {
  const ResidualFunction fn = [](std::span<const double> c) {
    return wrap({c[0] - 5.0, c[1] + 0.5});
  };
  const Box box{{0.0, 0.0}, {3.0, 1.0}};
  const LMResult r = lm_solve(fn, std::vector<double>{1.0, 0.5}, box, LMOptions{});
  for (const IterateRecord& it : r.iterates) EXPECT_TRUE(box.contains(it.c));
  EXPECT_NEAR(r.c[0], 3.0, 1e-9);
  EXPECT_NEAR(r.c[1], 0.0, 1e-9);
  EXPECT_EQ(r.termination, Termination::small_update);
}

TEST(Optimizer, DeterministicAcrossThreadCounts) {
  LMOptions opt;
  opt.max_iterations = 15;
  const std::vector<double> c0{-1.2, 1.0};
  const LMResult a = lm_solve(rosenbrock(), c0, Box::unbounded(2), opt);
  opt.threads = 4;
  const LMResult b = lm_solve(rosenbrock(), c0, Box::unbounded(2), opt);
  EXPECT_EQ(a.c, b.c);
  EXPECT_EQ(a.iterates.size(), b.iterates.size());
  EXPECT_EQ(a.function_evaluations, b.function_evaluations);
}

// With heavy damping the first step is a short gradient-descent step.
TEST(Optimizer, LargeDampingStepsAlongNegativeGradient) {
  const LinearProblem p;
  const std::vector<double> c0{1.0, 2.0, -1.0};
  LMOptions opt;
  opt.damping_init_factor = 1e6;
  opt.max_iterations = 1;
  const LMResult r = lm_solve(p.fn(), c0, Box::unbounded(3), opt);
  ASSERT_GE(r.iterates.size(), 2u);
  const Eigen::Vector3d s(1.0, 2.0, 1.0);
  Eigen::Vector3d step;
  for (int j = 0; j < 3; ++j) {
    step[j] = (r.iterates[1].c[static_cast<std::size_t>(j)] - c0[static_cast<std::size_t>(j)]) / s[j];
  }
  const Eigen::Map<const Eigen::Vector3d> x(c0.data());
  const Eigen::Vector3d g = s.asDiagonal() * (p.a.transpose() * (p.a * x - p.b));
  EXPECT_GT(-step.dot(g) / (step.norm() * g.norm()), 0.999999);
}

TEST(Optimizer, CountsEveryEvaluation) {
  std::atomic<std::size_t> calls{0};
  const ResidualFunction counted = [&](std::span<const double> c) {
    ++calls;
    return rosenbrock()(c);
  };
  LMOptions opt;
  opt.max_iterations = 10;
  const LMResult r = lm_solve(counted, std::vector<double>{-1.2, 1.0}, Box::unbounded(2), opt);
  EXPECT_EQ(r.function_evaluations, calls.load());
}

TEST(Optimizer, TerminatesImmediatelyAtExactSolution) {
  const LMResult r = lm_solve(rosenbrock(), std::vector<double>{1.0, 1.0}, Box::unbounded(2), LMOptions{});
  EXPECT_EQ(r.termination, Termination::small_error);
  EXPECT_EQ(r.iterations, 0u);
  EXPECT_EQ(r.function_evaluations, 1u);
}

TEST(Optimizer, RelativeErrorReport) {
  const auto e = relative_error_report(std::vector<double>{1.25, 0.0516, 0.5},
                                       std::vector<double>{1.0, 0.05, 0.0});
  EXPECT_NEAR(e[0].percent, 25.0, 1e-12);
  EXPECT_NEAR(e[1].percent, 3.2, 1e-12);
  EXPECT_TRUE(std::isnan(e[2].percent));
  EXPECT_TRUE(e[2].zero_truth);
  EXPECT_EQ(e[2].absolute, 0.5);
  EXPECT_THROW(relative_error_report(std::vector<double>{1.0}, std::vector<double>{}), InvalidInput);
}

TEST(Optimizer, SignPreservingBox) {
  const Box b = Box::sign_preserving(std::vector<double>{0.05, -2.0});
  EXPECT_EQ(b.lower, (std::vector<double>{0.0, -6.0}));
  EXPECT_EQ(b.upper, (std::vector<double>{0.15000000000000002, 0.0}));
  EXPECT_THROW(Box::sign_preserving(std::vector<double>{0.0}), InvalidInput);
  EXPECT_EQ(b.project(std::vector<double>{1.0, 1.0}), (std::vector<double>{0.15000000000000002, 0.0}));
}

TEST(Optimizer, RejectsBadInput) {
  const Box box{{0.0, 0.0}, {1.0, 1.0}};
  EXPECT_THROW(lm_solve(rosenbrock(), std::vector<double>{2.0, 0.5}, box, LMOptions{}), InvalidInput);
  const ResidualFunction short_fn = [](std::span<const double>) { return wrap({1.0}); };
  EXPECT_THROW(lm_solve(short_fn, std::vector<double>{0.5, 0.5}, box, LMOptions{}), InvalidInput);
  const ResidualFunction failing = [](std::span<const double>) {
    return ResidualVector::sentinel(2, "broken");
  };
  EXPECT_THROW(lm_solve(failing, std::vector<double>{0.5, 0.5}, box, LMOptions{}), OptimizerError);
  LMOptions bad;
  bad.fd_step = 0.0;
  EXPECT_THROW(lm_solve(rosenbrock(), std::vector<double>{0.5, 0.5}, box, bad), InvalidInput);
  EXPECT_EQ(to_string(Termination::small_gradient), "small_gradient");
}
