#include <CLI11.hpp>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>

#include "cellfit/cli/commands.hpp"
#include "cellfit/errors.hpp"

namespace {

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

std::size_t threads_from_env() {
  if (const char* env = std::getenv("CELLFIT_THREADS")) {
    try {
      return static_cast<std::size_t>(std::stoul(env));
    } catch (const std::exception&) {
      std::cerr << "cellfit: ignoring CELLFIT_THREADS='" << env << "'\n";
    }
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace cellfit;
  using namespace cellfit::cli;

  CLI::App app{"Parameter identification for evolving curves coupled to surface reaction-diffusion"};
  app.require_subcommand(1);
  std::string config_path;
  std::string output;
  std::uint64_t seed = 0;
  std::size_t threads = 0;

  const auto add_common = [&](CLI::App* cmd, bool config_required) {
    auto* opt = cmd->add_option("--config", config_path, "experiment config (TOML subset)");
    if (config_required) opt->required()->check(CLI::ExistingFile);
    cmd->add_option("--output", output, "output directory (overrides the config)");
    cmd->add_option("--seed", seed, "noise seed (overrides [data] seed)");
    cmd->add_option("--threads", threads, "worker threads; falls back to CELLFIT_THREADS");
  };
  auto* simulate = app.add_subcommand("simulate", "run the forward model and write the trajectory");
  auto* identify = app.add_subcommand("identify", "identify parameters with Levenberg-Marquardt");
  auto* perturb = app.add_subcommand("perturb", "replicated identification from noisy observations");
  auto* scan = app.add_subcommand("scan", "objective landscape on a two-parameter grid");
  auto* report = app.add_subcommand("report", "summarise the artifacts of a run directory");
  for (auto* cmd : {simulate, identify, perturb, scan}) add_common(cmd, true);
  add_common(report, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_config_error;
  }

  RunOptions options;
  options.threads = threads > 0 ? threads : threads_from_env();
  if (!output.empty()) options.output = output;
  if (app.got_subcommand("scan") || app.got_subcommand("perturb") || app.got_subcommand("identify")) {
    for (auto* cmd : {identify, perturb, scan}) {
      if (cmd->parsed() && cmd->count("--seed") > 0) options.seed = seed;
    }
  }

  CLI::App* chosen = app.get_subcommands().front();
  const std::string name = chosen->get_name();

  if (name == "report") {
    std::filesystem::path dir;
    if (!output.empty()) {
      dir = output;
    } else if (!config_path.empty()) {
      try {
        dir = load_config(config_path).output;
      } catch (const Error& e) {
        std::cerr << "cellfit: " << e.what() << "\n";
        return exit_config_error;
      }
    } else {
      std::cerr << "cellfit report: give --output <run dir> or --config\n";
      return exit_config_error;
    }
    return cmd_report(dir, std::cout);
  }

  ExperimentConfig cfg;
  try {
    cfg = load_config(config_path);
  } catch (const Error& e) {
    std::cerr << "cellfit: config error: " << e.what() << "\n";
    return exit_config_error;
  }

  const std::filesystem::path dir = options.output.value_or(cfg.output);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  std::ofstream log(dir / "run.log", std::ios::app);
  log << timestamp() << " start " << name << " config=" << config_path
      << " threads=" << options.threads << "\n";

  int code = exit_ok;
  try {
    if (name == "simulate") code = cmd_simulate(cfg, options, std::cout);
    if (name == "identify") code = cmd_identify(cfg, options, std::cout);
    if (name == "perturb") code = cmd_perturb(cfg, options, std::cout);
    if (name == "scan") code = cmd_scan(cfg, options, std::cout);
  } catch (const SolverError& e) {
    std::cerr << "cellfit: forward solver failed: " << e.what() << "\n";
    code = exit_forward_failure;
  } catch (const OptimizerError& e) {
    std::cerr << "cellfit: identification aborted by forward failures: " << e.what() << "\n";
    code = exit_forward_failure;
  } catch (const InvalidInput& e) {
    std::cerr << "cellfit: invalid input: " << e.what() << "\n";
    code = exit_config_error;
  } catch (const ParseError& e) {
    std::cerr << "cellfit: cannot read input: " << e.what() << "\n";
    code = exit_config_error;
  }
  log << timestamp() << " end " << name << " exit=" << code << "\n";
  return code;
}
