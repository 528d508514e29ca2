#include <benchmark/benchmark.h>

#include <filesystem>
#include <utility>

#include "cellfit/cli/commands.hpp"
#include "cellfit/cli/config.hpp"
#include "cellfit/objective.hpp"

namespace {

struct Setup {
  cellfit::cli::ExperimentConfig cfg;
  cellfit::cli::PreparedData data;
};

Setup setup(const char* name) {
  auto cfg = cellfit::cli::load_config(std::filesystem::path(CELLFIT_SOURCE_DIR) / "configs" / name);
  auto data = cellfit::cli::prepare_data(cfg);
  return {std::move(cfg), std::move(data)};
}

// One residual evaluation at the truth: forward run plus mismatch.
void BM_ResidualEvaluation(benchmark::State& state, const char* config) {
  const Setup s = setup(config);
  const cellfit::ResidualProblem problem(s.cfg.model, s.cfg.forward, s.data.clean,
                                         cellfit::WeightVector::ones(s.data.clean.n_fit()),
                                         s.cfg.objective);
  for (auto _ : state) benchmark::DoNotOptimize(problem(*s.cfg.true_values));
}
BENCHMARK_CAPTURE(BM_ResidualEvaluation, sharp, "reference_sharp.toml")->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_ResidualEvaluation, phase_field, "reference_phase_field.toml")
    ->Unit(benchmark::kMillisecond);

// Mismatch of one snapshot pair against itself shifted, by epsilon.
void BM_PhaseFieldMismatch(benchmark::State& state) {
  const Setup s = setup("reference_phase_field.toml");
  const auto& snaps = s.data.clean.snapshots;
  const auto& a = snaps[1];
  const auto& b = snaps.back();
  const double eps = 1.0 / static_cast<double>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        cellfit::phase_field_mismatch(a.points, a.fields, b.points, b.fields, eps));
  }
}
BENCHMARK(BM_PhaseFieldMismatch)->Arg(2)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_SharpMismatch(benchmark::State& state) {
  const Setup s = setup("reference_sharp.toml");
  const auto& a = s.data.clean.snapshots[1];
  const auto& b = s.data.clean.snapshots.back();
  for (auto _ : state) {
    benchmark::DoNotOptimize(cellfit::sharp_mismatch(a.points, a.fields, b.points, b.fields));
  }
}
BENCHMARK(BM_SharpMismatch)->Unit(benchmark::kMicrosecond);

}  // namespace
