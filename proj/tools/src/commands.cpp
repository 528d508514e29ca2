#include "cellfit/cli/commands.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>

#include "cellfit/errors.hpp"
#include "cellfit/parallel.hpp"

namespace cellfit::cli {

namespace {

using nlohmann::json;

// Shortest round-trip decimal form.
std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc{} ? std::string(buf, ptr) : std::string("nan");
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::setprecision(digits) << v;
  return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write '" + path.string() + "'");
  out << text;
}

std::filesystem::path output_directory(const ExperimentConfig& cfg, const RunOptions& options) {
  const std::filesystem::path dir = options.output.value_or(cfg.output);
  std::filesystem::create_directories(dir);
  return dir;
}

std::uint64_t base_seed(const ExperimentConfig& cfg, const RunOptions& options) {
  return options.seed.value_or(cfg.data.seed);
}

std::string form_name(ObjectiveForm f) { return f == ObjectiveForm::sharp ? "sharp" : "phase_field"; }

std::string distribution_name(NoiseDistribution d) {
  return d == NoiseDistribution::normal ? "normal" : "uniform";
}

// Parameters used for forward runs: the truth when known, else the initial guess.
std::vector<double> reference_parameters(const ExperimentConfig& cfg) {
  return cfg.true_values ? *cfg.true_values : cfg.initial_guess;
}

std::string table_row(const std::vector<std::string>& cells, const std::vector<std::size_t>& widths) {
  std::string row;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    std::string c = cells[i];
    if (c.size() < widths[i]) c.append(widths[i] - c.size(), ' ');
    row += (i ? "  " : "") + c;
  }
  while (!row.empty() && row.back() == ' ') row.pop_back();
  return row + "\n";
}

std::string render_table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> widths;
  for (const auto& r : rows) {
    widths.resize(std::max(widths.size(), r.size()), 0);
    for (std::size_t i = 0; i < r.size(); ++i) widths[i] = std::max(widths[i], r[i].size());
  }
  std::string out;
  for (const auto& r : rows) out += table_row(r, widths);
  return out;
}

}  // namespace

PreparedData prepare_data(const ExperimentConfig& cfg) {
  if (cfg.data.observations) {
    ObservationSet obs = load_observations(*cfg.data.observations);
    const ObsSnapshot& first = obs.snapshots.front();
    if (!first.ordered) throw InvalidInput("the first observation must be ordered (initial data)");
    return {Curve(first.points), first.fields, std::move(obs)};
  }
  auto [curve, fields] = make_initial_data(cfg.shape, cfg.forward.n_vertices, cfg.species_rule);
  const std::vector<double> c = reference_parameters(cfg);
  ObservationSet obs =
      generate_targets(cfg.model, cfg.forward, c, curve, fields, cfg.data.observation_times);
  if (!cfg.true_values) obs.metadata.c_true.reset();
  return {std::move(curve), std::move(fields), std::move(obs)};
}

WeightVector make_weights(const ExperimentConfig& cfg, const ResidualProblem& unit_weight_problem) {
  const std::size_t ns = unit_weight_problem.observations().n_fit();
  switch (cfg.weights.preset) {
    case WeightPreset::ones: return WeightVector::ones(ns);
    case WeightPreset::alpha: return WeightVector::alpha(ns, cfg.weights.alpha);
    case WeightPreset::explicit_values:
      if (cfg.weights.values.size() != 2 * ns) {
        throw InvalidInput("[objective] explicit weights need " + std::to_string(2 * ns) + " values");
      }
      return WeightVector(cfg.weights.values);
    case WeightPreset::balanced:
      return WeightVector::balanced(unit_weight_problem(cfg.initial_guess));
  }
  return WeightVector::ones(ns);
}

LMResult run_identification(const ExperimentConfig& cfg, const ObservationSet& obs,
                            std::size_t threads) {
  if (cfg.model.n_parameters() == 0) throw InvalidInput("identify needs at least one free parameter");
  ResidualProblem problem(cfg.model, cfg.forward, obs, WeightVector::ones(obs.n_fit()), cfg.objective);
  problem.set_weights(make_weights(cfg, problem));
  LMOptions options = cfg.optimizer;
  options.threads = threads;
  const ResidualFunction fn = [&problem](std::span<const double> c) { return problem(c); };
  std::vector<double> truth;
  if (cfg.true_values) {
    truth = *cfg.true_values;
  } else if (obs.metadata.c_true && obs.metadata.c_true->size() == cfg.initial_guess.size()) {
    truth = *obs.metadata.c_true;
  }
  return lm_solve(fn, cfg.initial_guess, cfg.box, options, truth);
}

std::vector<ScanCell> run_scan(const ExperimentConfig& cfg, const ObservationSet& obs,
                               const std::vector<ObjectiveForm>& forms, std::size_t threads) {
  const ScanConfig& sc = cfg.scan;
  if (sc.parameters.size() != 2) throw InvalidInput("[scan] needs two parameters");
  const auto names = cfg.model.parameter_names();
  const auto index_of = [&](const std::string& p) {
    return static_cast<std::size_t>(std::find(names.begin(), names.end(), p) - names.begin());
  };
  const std::size_t i1 = index_of(sc.parameters[0]);
  const std::size_t i2 = index_of(sc.parameters[1]);
  const std::vector<double> centre = reference_parameters(cfg);
  const std::size_t p = sc.points;
  auto axis = [&](std::size_t idx, std::size_t k) {
    if (p == 1) return centre[idx];
    const double f = -1.0 + 2.0 * static_cast<double>(k) / static_cast<double>(p - 1);
    return centre[idx] * (1.0 + sc.relative_range * f);
  };

  struct Variant {
    ObjectiveForm form;
    double epsilon;
    double alpha;
  };
  std::vector<Variant> variants;
  for (ObjectiveForm form : forms) {
    std::vector<double> eps{cfg.objective.epsilon};
    if (form == ObjectiveForm::phase_field && !sc.epsilons.empty()) eps = sc.epsilons;
    if (form == ObjectiveForm::sharp) eps = {0.0};
    for (double e : eps) {
      for (double a : sc.alphas) variants.push_back({form, e, a});
    }
  }

  const ResidualProblem problem(cfg.model, cfg.forward, obs, WeightVector::ones(obs.n_fit()),
                                ObjectiveOptions{});
  std::vector<ScanCell> cells(p * p * variants.size());
  parallel_for(p * p, threads, [&](std::size_t g) {
    const std::size_t a = g / p;
    const std::size_t b = g % p;
    std::vector<double> c = centre;
    c[i1] = axis(i1, a);
    c[i2] = axis(i2, b);
    std::optional<Trajectory> traj;
    try {
      std::vector<double> clamped = cfg.box.project(c);
      if (clamped == c) traj = problem.simulate(c);
    } catch (const SolverError&) {
    }
    for (std::size_t v = 0; v < variants.size(); ++v) {
      ScanCell& cell = cells[v * p * p + g];
      cell.form = form_name(variants[v].form);
      cell.epsilon = variants[v].epsilon;
      cell.alpha = variants[v].alpha;
      cell.p1 = c[i1];
      cell.p2 = c[i2];
      if (!traj) continue;
      ObjectiveOptions opts = cfg.objective;
      opts.form = variants[v].form;
      if (variants[v].form == ObjectiveForm::phase_field) opts.epsilon = variants[v].epsilon;
      const ResidualVector r =
          residuals(*traj, obs, WeightVector::alpha(obs.n_fit(), variants[v].alpha), opts);
      const ObjectiveValue j = objective_split(r);
      cell.ok = true;
      cell.objective = j.total;
      cell.position = j.position;
      cell.concentration = j.concentration;
    }
  });
  return cells;
}

int cmd_simulate(const ExperimentConfig& cfg, const RunOptions& options, std::ostream& out) {
  const std::filesystem::path dir = output_directory(cfg, options);
  auto [curve, fields] = make_initial_data(cfg.shape, cfg.forward.n_vertices, cfg.species_rule);
  const std::vector<double> c = reference_parameters(cfg);
  const Model model = bind_parameters(cfg.model, c);
  const Trajectory traj = simulate(curve, fields, cfg.forward, model, cfg.data.observation_times);
  save_trajectory(traj, dir / "trajectory.json");
  ObservationSet obs = observations_from_trajectory(traj);
  if (cfg.true_values) obs.metadata.c_true = *cfg.true_values;
  obs.metadata.parameter_names = cfg.model.parameter_names();
  save_observations(obs, dir / "observations.json");

  std::vector<std::vector<std::string>> rows{{"t", "area", "perimeter"}};
  for (std::size_t k = 0; k < model.n_species(); ++k) {
    rows[0].push_back("a" + std::to_string(k + 1) + "_min");
    rows[0].push_back("a" + std::to_string(k + 1) + "_max");
  }
  for (const Snapshot& s : traj.snapshots) {
    std::vector<std::string> row{fixed(s.time, 6), fixed(enclosed_area(s.curve), 8),
                                 fixed(perimeter(s.curve.vertices()), 8)};
    for (std::size_t k = 0; k < s.fields.n_species(); ++k) {
      const auto sp = s.fields.species(k);
      const auto [lo, hi] = std::minmax_element(sp.begin(), sp.end());
      row.push_back(fixed(*lo, 8));
      row.push_back(fixed(*hi, 8));
    }
    rows.push_back(std::move(row));
  }
  std::string summary = "snapshots: " + std::to_string(traj.snapshots.size()) +
                        "\nremesh events: " + std::to_string(traj.remesh_events) + "\n\n" +
                        render_table(rows);
  write_text(dir / "summary.txt", summary);
  out << summary;
  return exit_ok;
}

namespace {

json result_json(const ExperimentConfig& cfg, const LMResult& r) {
  json j;
  const auto names = cfg.model.parameter_names();
  json params = json::array();
  for (std::size_t i = 0; i < names.size(); ++i) {
    json p{{"name", names[i]}, {"initial", cfg.initial_guess[i]}, {"computed", r.c[i]}};
    if (cfg.true_values) p["true"] = (*cfg.true_values)[i];
    if (i < r.relative_errors.size() && !r.relative_errors[i].zero_truth) {
      p["relative_error_percent"] = r.relative_errors[i].percent;
    }
    params.push_back(std::move(p));
  }
  j["parameters"] = std::move(params);
  j["termination"] = to_string(r.termination);
  j["iterations"] = r.iterations;
  j["function_evaluations"] = r.function_evaluations;
  const ObjectiveValue v = objective_split(r.residual);
  j["objective"] = v.total;
  j["objective_position"] = v.position;
  j["objective_concentration"] = v.concentration;
  j["form"] = form_name(cfg.objective.form);
  if (cfg.objective.form == ObjectiveForm::phase_field) j["epsilon"] = cfg.objective.epsilon;
  return j;
}

std::string trace_csv(const ExperimentConfig& cfg, const LMResult& r) {
  std::string csv = "iteration,accepted,J,J_position,J_concentration,mu,evaluations";
  for (const auto& name : cfg.model.parameter_names()) csv += "," + name;
  csv += "\n";
  for (const IterateRecord& it : r.iterates) {
    csv += std::to_string(it.iteration) + "," + (it.accepted ? "1" : "0") + "," + num(it.objective) +
           "," + num(it.position) + "," + num(it.concentration) + "," + num(it.mu) + "," +
           std::to_string(it.evaluations);
    for (double v : it.c) csv += "," + num(v);
    csv += "\n";
  }
  return csv;
}

std::string identification_table(const json& result) {
  std::vector<std::vector<std::string>> rows{{"parameter", "true", "initial", "computed", "rel. error %"}};
  for (const auto& p : result["parameters"]) {
    rows.push_back({p["name"].get<std::string>(),
                    p.contains("true") ? fixed(p["true"].get<double>(), 6) : "-",
                    fixed(p["initial"].get<double>(), 6), fixed(p["computed"].get<double>(), 6),
                    p.contains("relative_error_percent")
                        ? fixed(p["relative_error_percent"].get<double>(), 3)
                        : "-"});
  }
  std::string out = render_table(rows);
  out += "termination: " + result["termination"].get<std::string>() +
         ", iterations: " + std::to_string(result["iterations"].get<std::size_t>()) +
         ", function evaluations: " + std::to_string(result["function_evaluations"].get<std::size_t>()) +
         "\nJ = " + fixed(result["objective"].get<double>(), 6) +
         " (position " + fixed(result["objective_position"].get<double>(), 6) + ", concentration " +
         fixed(result["objective_concentration"].get<double>(), 6) + ")\n";
  return out;
}

ObservationSet observations_for_run(const ExperimentConfig& cfg, const ObservationSet& clean,
                                    std::uint64_t seed) {
  const double level = cfg.data.noise_levels.empty() ? 0.0 : cfg.data.noise_levels.front();
  if (level == 0.0) return clean;
  return add_noise(clean, {cfg.data.noise_distributions.front(), level, seed});
}

}  // namespace

int cmd_identify(const ExperimentConfig& cfg, const RunOptions& options, std::ostream& out) {
  const std::filesystem::path dir = output_directory(cfg, options);
  const PreparedData data = prepare_data(cfg);
  const ObservationSet obs = observations_for_run(cfg, data.clean, base_seed(cfg, options));
  save_observations(obs, dir / "observations.json");
  const LMResult r = run_identification(cfg, obs, options.threads);
  const json result = result_json(cfg, r);
  write_text(dir / "result.json", result.dump(1) + "\n");
  write_text(dir / "trace.csv", trace_csv(cfg, r));
  const std::string table = identification_table(result);
  write_text(dir / "summary.txt", table);
  out << table;
  return r.termination == Termination::max_iterations ? exit_not_converged : exit_ok;
}

int cmd_perturb(const ExperimentConfig& cfg, const RunOptions& options, std::ostream& out) {
  const std::filesystem::path dir = output_directory(cfg, options);
  if (!cfg.true_values) throw InvalidInput("perturb needs [parameters] true to report errors");
  const PreparedData data = prepare_data(cfg);
  const std::uint64_t seed0 = base_seed(cfg, options);
  const std::size_t reps = cfg.data.replications;
  const auto& dists = cfg.data.noise_distributions;
  const auto& levels = cfg.data.noise_levels;
  const std::size_t np = cfg.model.n_parameters();

  struct Run {
    bool ok = false;
    std::string status;
    LMResult result;
  };
  std::vector<Run> runs(dists.size() * levels.size() * reps);
  parallel_for(runs.size(), options.threads, [&](std::size_t idx) {
    const std::size_t r = idx % reps;
    const std::size_t l = (idx / reps) % levels.size();
    const std::size_t d = idx / (reps * levels.size());
    const ObservationSet noisy = add_noise(data.clean, {dists[d], levels[l], seed0 + r});
    try {
      runs[idx].result = run_identification(cfg, noisy, 1);
      runs[idx].ok = true;
      runs[idx].status = to_string(runs[idx].result.termination);
    } catch (const Error& e) {
      runs[idx].status = std::string("failed: ") + e.what();
    }
  });

  const auto names = cfg.model.parameter_names();
  std::string runs_csv = "distribution,k_n,replication,seed,status,iterations";
  for (const auto& n : names) runs_csv += "," + n;
  for (const auto& n : names) runs_csv += ",rel_error_" + n;
  runs_csv += "\n";
  std::string stats_csv = "distribution,k_n,parameter,mean_rel_error_percent,std_rel_error_percent,runs_ok,runs_failed\n";
  std::vector<std::vector<std::string>> rows{{"distribution", "k_n", "parameter", "mean %", "std %", "ok", "failed"}};

  for (std::size_t d = 0; d < dists.size(); ++d) {
    for (std::size_t l = 0; l < levels.size(); ++l) {
      std::vector<std::vector<double>> errs(np);
      std::size_t failed = 0;
      for (std::size_t r = 0; r < reps; ++r) {
        const Run& run = runs[(d * levels.size() + l) * reps + r];
        runs_csv += distribution_name(dists[d]) + "," + num(levels[l]) + "," + std::to_string(r) + "," +
                    std::to_string(seed0 + r) + ",\"" + run.status + "\"," +
                    (run.ok ? std::to_string(run.result.iterations) : "");
        for (std::size_t i = 0; i < np; ++i) runs_csv += "," + (run.ok ? num(run.result.c[i]) : "");
        for (std::size_t i = 0; i < np; ++i) {
          runs_csv += "," + (run.ok ? num(run.result.relative_errors[i].percent) : "");
        }
        runs_csv += "\n";
        if (!run.ok) {
          ++failed;
          continue;
        }
        for (std::size_t i = 0; i < np; ++i) errs[i].push_back(run.result.relative_errors[i].percent);
      }
      for (std::size_t i = 0; i < np; ++i) {
        const auto n = static_cast<double>(errs[i].size());
        double mean = 0.0;
        for (double e : errs[i]) mean += e;
        mean = errs[i].empty() ? std::nan("") : mean / n;
        double var = 0.0;
        for (double e : errs[i]) var += (e - mean) * (e - mean);
        const double sd = errs[i].size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
        stats_csv += distribution_name(dists[d]) + "," + num(levels[l]) + "," + names[i] + "," + num(mean) +
                     "," + num(sd) + "," + std::to_string(errs[i].size()) + "," + std::to_string(failed) + "\n";
        rows.push_back({distribution_name(dists[d]), fixed(levels[l], 4), names[i], fixed(mean, 4),
                        fixed(sd, 4), std::to_string(errs[i].size()), std::to_string(failed)});
      }
    }
  }
  write_text(dir / "perturb_runs.csv", runs_csv);
  write_text(dir / "perturb.csv", stats_csv);
  out << render_table(rows);
  const bool any_ok = std::any_of(runs.begin(), runs.end(), [](const Run& r) { return r.ok; });
  return any_ok ? exit_ok : exit_forward_failure;
}

int cmd_scan(const ExperimentConfig& cfg, const RunOptions& options, std::ostream& out) {
  const std::filesystem::path dir = output_directory(cfg, options);
  const PreparedData data = prepare_data(cfg);
  std::vector<ObjectiveForm> forms = cfg.scan.forms;
  if (forms.empty()) forms = {cfg.objective.form};
  const std::vector<ScanCell> cells = run_scan(cfg, data.clean, forms, options.threads);

  const auto& p = cfg.scan.parameters;
  std::string csv = "form,epsilon,alpha," + p[0] + "," + p[1] + ",status,J,J_position,J_concentration\n";
  struct Best {
    const ScanCell* cell = nullptr;
    std::size_t missing = 0;
  };
  std::map<std::tuple<std::string, double, double>, Best> best;
  for (const ScanCell& c : cells) {
    csv += c.form + "," + num(c.epsilon) + "," + num(c.alpha) + "," + num(c.p1) + "," + num(c.p2) + "," +
           (c.ok ? "ok," + num(c.objective) + "," + num(c.position) + "," + num(c.concentration)
                 : std::string("missing,,,")) +
           "\n";
    Best& b = best[{c.form, c.epsilon, c.alpha}];
    if (!c.ok) {
      ++b.missing;
    } else if (!b.cell || c.objective < b.cell->objective) {
      b.cell = &c;
    }
  }
  write_text(dir / "scan.csv", csv);
  std::vector<std::vector<std::string>> rows{{"form", "epsilon", "alpha", "argmin " + p[0], "argmin " + p[1], "J min", "missing"}};
  for (const auto& [key, b] : best) {
    rows.push_back({std::get<0>(key), fixed(std::get<1>(key), 4), fixed(std::get<2>(key), 4),
                    b.cell ? fixed(b.cell->p1, 6) : "-", b.cell ? fixed(b.cell->p2, 6) : "-",
                    b.cell ? fixed(b.cell->objective, 6) : "-", std::to_string(b.missing)});
  }
  out << render_table(rows);
  return exit_ok;
}

namespace {

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (char ch : line) {
      if (ch == '"') {
        quoted = !quoted;
      } else if (ch == ',' && !quoted) {
        cells.push_back(cell);
        cell.clear();
      } else {
        cell += ch;
      }
    }
    cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace

int cmd_report(const std::filesystem::path& run_directory, std::ostream& out) {
  std::string report;
  std::vector<std::string> missing;
  const auto has = [&](const char* name) {
    const bool ok = std::filesystem::exists(run_directory / name);
    if (!ok) missing.push_back(name);
    return ok;
  };

  if (has("result.json")) {
    std::ifstream in(run_directory / "result.json");
    try {
      const json result = json::parse(in);
      report += "== identification (" + result.value("form", std::string("?")) + ") ==\n";
      report += identification_table(result);
    } catch (const std::exception& e) {
      report += "== identification ==\nresult.json unreadable: " + std::string(e.what()) + "\n";
    }
  }
  if (has("trace.csv")) {
    const auto rows = read_csv(run_directory / "trace.csv");
    std::size_t accepted = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) accepted += rows[i].size() > 1 && rows[i][1] == "1";
    report += "\n== trace ==\n" + std::to_string(rows.empty() ? 0 : rows.size() - 1) + " iterate records, " +
              std::to_string(accepted) + " accepted\n";
  }
  if (has("perturb.csv")) {
    auto rows = read_csv(run_directory / "perturb.csv");
    report += "\n== noisy replications ==\n" + render_table(rows);
  }
  if (has("scan.csv")) {
    const auto rows = read_csv(run_directory / "scan.csv");
    std::map<std::string, std::pair<double, std::vector<std::string>>> minima;
    std::size_t n_missing = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const auto& r = rows[i];
      if (r.size() < 7) continue;
      if (r[5] != "ok") {
        ++n_missing;
        continue;
      }
      const std::string key = r[0] + " eps=" + r[1] + " alpha=" + r[2];
      const double j = std::stod(r[6]);
      auto it = minima.find(key);
      if (it == minima.end() || j < it->second.first) minima[key] = {j, r};
    }
    std::vector<std::vector<std::string>> table{{"scan", rows.empty() ? "p1" : rows[0][3],
                                                 rows.empty() ? "p2" : rows[0][4], "J min"}};
    for (const auto& [key, v] : minima) table.push_back({key, v.second[3], v.second[4], v.second[6]});
    report += "\n== objective scan minima ==\n" + render_table(table) +
              std::to_string(n_missing) + " missing cells\n";
  }
  if (has("summary.txt") && !std::filesystem::exists(run_directory / "result.json")) {
    std::ifstream in(run_directory / "summary.txt");
    std::ostringstream os;
    os << in.rdbuf();
    report += "\n== simulation summary ==\n" + os.str();
  }
  if (report.empty()) {
    report = "empty report: no cellfit artifacts found in " + run_directory.string() + "\n";
  } else if (!missing.empty()) {
    report += "\nnot present:";
    for (const auto& m : missing) report += " " + m;
    report += "\n";
  }
  if (std::filesystem::is_directory(run_directory)) write_text(run_directory / "report.txt", report);
  out << report;
  return exit_ok;
}

}  // namespace cellfit::cli
