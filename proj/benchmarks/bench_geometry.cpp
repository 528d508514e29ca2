#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "cellfit/geometry.hpp"

namespace {

std::vector<cellfit::Vec2> circle(std::size_t n) {
  std::vector<cellfit::Vec2> pts(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    pts[k] = {std::cos(t), std::sin(t)};
  }
  return pts;
}

std::vector<cellfit::Vec2> queries(std::size_t n) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  std::vector<cellfit::Vec2> q(n);
  for (auto& p : q) p = {u(rng), u(rng)};
  return q;
}

void BM_SegmentIndexSignedDistance(benchmark::State& state) {
  const auto poly = circle(static_cast<std::size_t>(state.range(0)));
  const cellfit::SegmentIndex index(poly);
  const auto q = queries(4096);
  for (auto _ : state) {
    double s = 0.0;
    for (const auto& p : q) s += index.signed_distance(p);
    benchmark::DoNotOptimize(s);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(q.size()));
}
BENCHMARK(BM_SegmentIndexSignedDistance)->Arg(64)->Arg(256)->Arg(1024);

void BM_PointIndexNearest(benchmark::State& state) {
  const auto pts = circle(static_cast<std::size_t>(state.range(0)));
  const cellfit::PointIndex index(pts);
  const auto q = queries(4096);
  for (auto _ : state) {
    double s = 0.0;
    for (const auto& p : q) s += index.nearest(p).distance;
    benchmark::DoNotOptimize(s);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(q.size()));
}
BENCHMARK(BM_PointIndexNearest)->Arg(64)->Arg(256)->Arg(1024);

void BM_CurvatureVector(benchmark::State& state) {
  const cellfit::Curve c(circle(static_cast<std::size_t>(state.range(0))));
  for (auto _ : state) benchmark::DoNotOptimize(cellfit::discrete_curvature_vector(c));
}
BENCHMARK(BM_CurvatureVector)->Arg(64)->Arg(1024);

}  // namespace
