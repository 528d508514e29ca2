#include <benchmark/benchmark.h>

#include <filesystem>

#include "cellfit/cli/config.hpp"
#include "cellfit/forward_solver.hpp"

namespace {

cellfit::cli::ExperimentConfig reference_run(std::size_t n_vertices) {
  auto cfg = cellfit::cli::load_config(std::filesystem::path(CELLFIT_SOURCE_DIR) / "configs" /
                                       "reference_sharp.toml");
  cfg.forward.n_vertices = n_vertices;
  return cfg;
}

void BM_ForwardStep(benchmark::State& state) {
  const auto cfg = reference_run(static_cast<std::size_t>(state.range(0)));
  auto [curve, fields] =
      cellfit::make_initial_data(cfg.shape, cfg.forward.n_vertices, cfg.species_rule);
  const cellfit::Model model = cellfit::bind_parameters(cfg.model, *cfg.true_values);
  const cellfit::SolverState s0(curve, fields);
  for (auto _ : state) benchmark::DoNotOptimize(cellfit::step(s0, cfg.forward, model));
}
BENCHMARK(BM_ForwardStep)->Arg(64)->Arg(128)->Arg(256)->Arg(1024);

void BM_SimulateReference(benchmark::State& state) {
  const auto cfg = reference_run(static_cast<std::size_t>(state.range(0)));
  auto [curve, fields] =
      cellfit::make_initial_data(cfg.shape, cfg.forward.n_vertices, cfg.species_rule);
  const cellfit::Model model = cellfit::bind_parameters(cfg.model, *cfg.true_values);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        cellfit::simulate(curve, fields, cfg.forward, model, cfg.data.observation_times));
  }
}
BENCHMARK(BM_SimulateReference)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

}  // namespace
