#include "cellfit/cli/config.hpp"

#include <fstream>
#include <sstream>

#include "cellfit/cli/toml.hpp"
#include "cellfit/errors.hpp"

namespace cellfit::cli {

namespace {

template <class T>
void assign(std::optional<T> v, T& target) {
  if (v) target = std::move(*v);
}

void assign_size(const TomlDocument& doc, const std::string& s, const std::string& k, std::size_t& target) {
  if (auto v = doc.integer(s, k)) target = static_cast<std::size_t>(*v);
}

NoiseDistribution parse_distribution(const std::string& name) {
  if (name == "normal") return NoiseDistribution::normal;
  if (name == "uniform") return NoiseDistribution::uniform;
  throw InvalidInput("[data] noise distribution '" + name + "' is not normal or uniform");
}

void read_forward(const TomlDocument& doc, ExperimentConfig& cfg) {
  const std::string s = "forward";
  SolverConfig& f = cfg.forward;
  assign(doc.number(s, "dt"), f.dt);
  assign_size(doc, s, "n_vertices", f.n_vertices);
  assign(doc.number(s, "remesh_ratio"), f.remesh_ratio_threshold);
  assign(doc.boolean(s, "remesh"), f.remesh_enabled);
  assign(doc.boolean(s, "check_self_intersection"), f.check_self_intersection);
  assign(doc.boolean(s, "literal_volume_sign"), f.literal_volume_sign);

  const std::string shape = doc.string(s, "shape").value_or("unit_circle");
  if (shape == "unit_circle") {
    cfg.shape.kind = InitialShapeKind::unit_circle;
  } else if (shape == "capsule") {
    cfg.shape.kind = InitialShapeKind::capsule;
  } else {
    throw InvalidInput("[forward] shape must be \"unit_circle\" or \"capsule\"");
  }
  assign(doc.number(s, "capsule_length"), cfg.shape.length);
  assign(doc.number(s, "capsule_radius"), cfg.shape.radius);

  const std::string init = doc.string(s, "initial_species").value_or("steady_state_perturbation");
  if (init == "steady_state_perturbation") {
    cfg.species_rule = SteadyStatePerturbationRule{};
  } else if (init == "homogeneous") {
    HomogeneousRule rule;
    assign(doc.numbers(s, "homogeneous_values"), rule.values);
    cfg.species_rule = rule;
  } else if (init == "polarized") {
    PolarizedRule rule;
    assign(doc.number(s, "polarized_low"), rule.low);
    assign(doc.number(s, "polarized_high"), rule.high);
    assign(doc.number(s, "polarized_exponent"), rule.exponent);
    cfg.species_rule = rule;
  } else {
    throw InvalidInput(
        "[forward] initial_species must be steady_state_perturbation, homogeneous or polarized");
  }
}

void read_model(const TomlDocument& doc, ExperimentConfig& cfg) {
  const std::string s = "model";
  ModelSpec& m = cfg.model;
  const std::string kinetics = doc.string(s, "kinetics").value_or("schnakenberg");
  if (kinetics == "schnakenberg") {
    Schnakenberg k;
    assign(doc.number(s, "gamma"), k.gamma);
    assign(doc.number(s, "k1"), k.k1);
    assign(doc.number(s, "k2"), k.k2);
    m.kinetics = k;
  } else if (kinetics == "none") {
    m.kinetics = NoKinetics{};
  } else {
    throw InvalidInput("[model] kinetics must be \"schnakenberg\" or \"none\"");
  }
  const std::string forcing = doc.string(s, "forcing").value_or("proportional");
  if (forcing == "proportional") {
    ProportionalForcing g;
    assign(doc.numbers(s, "kp"), g.kp);
    m.forcing = g;
  } else if (forcing == "none") {
    m.forcing = ProportionalForcing{{}};
  } else if (forcing == "yeast") {
    YeastForcing g;
    assign(doc.number(s, "yeast_k1"), g.k1);
    assign(doc.number(s, "yeast_k2"), g.k2);
    assign(doc.number(s, "k_reg"), g.k_reg);
    assign(doc.boolean(s, "smoothstep"), g.smoothstep_transition);
    if (auto sp = doc.integer(s, "yeast_species")) {
      if (*sp == 0) throw InvalidInput("[model] yeast_species is 1-based");
      g.species = static_cast<std::size_t>(*sp - 1);
    }
    m.forcing = g;
  } else {
    throw InvalidInput("[model] forcing must be \"proportional\", \"yeast\" or \"none\"");
  }
  assign(doc.number(s, "sigma"), m.physics.surface_tension);
  assign(doc.number(s, "k_b"), m.physics.bending_rigidity);
  assign(doc.number(s, "lambda"), m.physics.volume_penalty);
  assign(doc.numbers(s, "diffusion"), m.physics.diffusion);

  if (auto* steady = std::get_if<SteadyStatePerturbationRule>(&cfg.species_rule)) {
    if (const auto* k = std::get_if<Schnakenberg>(&m.kinetics)) {
      *steady = {k->gamma, k->k1, k->k2};
    } else {
      throw InvalidInput("steady_state_perturbation initial data needs Schnakenberg kinetics");
    }
  }
}

void read_parameters(const TomlDocument& doc, ExperimentConfig& cfg) {
  const std::string s = "parameters";
  std::vector<std::string> names{"kp_2", "gamma", "k_b"};
  std::vector<double> initial{3.75e-2, 25.0, 1.15e-2};
  std::optional<std::vector<double>> truth = std::vector<double>{5e-2, 20.0, 1e-2};
  std::optional<std::string> box_kind = "sign_preserving_3x";
  std::optional<std::vector<double>> lower, upper;
  if (doc.has_section(s)) {
    names = doc.strings(s, "names").value_or(std::vector<std::string>{});
    initial = doc.numbers(s, "initial").value_or(std::vector<double>{});
    truth = doc.numbers(s, "true");
    box_kind = doc.string(s, "box");
    lower = doc.numbers(s, "lower");
    upper = doc.numbers(s, "upper");
  }
  const double factor = doc.number(s, "box_factor").value_or(3.0);
  const std::size_t n = names.size();
  if (initial.size() != n) {
    throw InvalidInput("[parameters] initial has " + std::to_string(initial.size()) +
                       " values for " + std::to_string(n) + " names");
  }
  if (truth && truth->size() != n) throw InvalidInput("[parameters] true must match names");

  if (box_kind && (lower || upper)) {
    throw InvalidInput("[parameters] give either box or lower/upper, not both");
  }
  if (box_kind) {
    if (*box_kind != "sign_preserving_3x" && *box_kind != "sign_preserving") {
      throw InvalidInput("[parameters] box must be \"sign_preserving_3x\" or explicit lower/upper");
    }
    const std::vector<double>& ref = truth ? *truth : initial;
    cfg.box = Box::sign_preserving(ref, factor);
  } else if (lower && upper) {
    if (lower->size() != n || upper->size() != n) {
      throw InvalidInput("[parameters] lower/upper must match names");
    }
    cfg.box = Box{*lower, *upper};
  } else if (n > 0) {
    throw InvalidInput("[parameters] every free parameter needs a box (box = ... or lower/upper)");
  }

  cfg.model.free_parameters.clear();
  for (std::size_t i = 0; i < n; ++i) {
    if (!(cfg.box.lower[i] <= cfg.box.upper[i])) {
      throw InvalidInput("[parameters] box for '" + names[i] + "' is empty");
    }
    cfg.model.free_parameters.push_back({names[i], i, cfg.box.lower[i], cfg.box.upper[i]});
  }
  cfg.initial_guess = initial;
  cfg.true_values = truth;
  if (n > 0 && !cfg.box.contains(initial)) {
    throw InvalidInput("[parameters] initial guess lies outside the box");
  }
  if (truth && n > 0 && !cfg.box.contains(*truth)) {
    throw InvalidInput("[parameters] true values lie outside the box");
  }
}

void read_objective(const TomlDocument& doc, ExperimentConfig& cfg) {
  const std::string s = "objective";
  const std::string form = doc.string(s, "form").value_or("sharp");
  if (form == "sharp") {
    cfg.objective.form = ObjectiveForm::sharp;
  } else if (form == "phase_field") {
    cfg.objective.form = ObjectiveForm::phase_field;
  } else {
    throw InvalidInput("[objective] form must be \"sharp\" or \"phase_field\"");
  }
  assign(doc.number(s, "epsilon"), cfg.objective.epsilon);
  assign(doc.number(s, "cells_per_epsilon"), cfg.objective.cells_per_epsilon);
  if (!(cfg.objective.epsilon > 0.0)) throw InvalidInput("[objective] epsilon must be positive");

  const std::string weights = doc.string(s, "weights").value_or("ones");
  if (weights == "ones") {
    cfg.weights.preset = WeightPreset::ones;
  } else if (weights == "alpha") {
    cfg.weights.preset = WeightPreset::alpha;
  } else if (weights == "balanced") {
    cfg.weights.preset = WeightPreset::balanced;
  } else if (weights == "explicit") {
    cfg.weights.preset = WeightPreset::explicit_values;
  } else {
    throw InvalidInput("[objective] weights must be ones, alpha, balanced or explicit");
  }
  assign(doc.number(s, "alpha"), cfg.weights.alpha);
  assign(doc.numbers(s, "values"), cfg.weights.values);
  if (cfg.weights.preset == WeightPreset::alpha && !(cfg.weights.alpha > 0.0)) {
    throw InvalidInput("[objective] alpha must be positive");
  }
  if (cfg.weights.preset == WeightPreset::explicit_values && cfg.weights.values.empty()) {
    throw InvalidInput("[objective] explicit weights need values = [...]");
  }
}

void read_optimizer(const TomlDocument& doc, ExperimentConfig& cfg) {
  const std::string s = "optimizer";
  LMOptions& o = cfg.optimizer;
  assign(doc.number(s, "fd_step"), o.fd_step);
  assign(doc.number(s, "stop_gradient"), o.stop_gradient);
  assign(doc.number(s, "stop_update"), o.stop_update);
  assign(doc.number(s, "stop_error"), o.stop_error);
  assign_size(doc, s, "max_iterations", o.max_iterations);
  assign(doc.number(s, "damping_init_factor"), o.damping_init_factor);
  assign(doc.boolean(s, "central_differences"), o.central_differences);
  const std::string scaling = doc.string(s, "scaling").value_or("initial_guess");
  if (scaling == "initial_guess") {
    o.scaling_reference = ScalingReference::initial_guess;
  } else if (scaling == "provided_values") {
    o.scaling_reference = ScalingReference::provided_values;
    o.scale = doc.numbers(s, "scale").value_or(std::vector<double>{});
  } else if (scaling == "true_values") {
    if (!cfg.true_values) throw InvalidInput("[optimizer] scaling = true_values needs [parameters] true");
    o.scaling_reference = ScalingReference::provided_values;
    o.scale = *cfg.true_values;
  } else {
    throw InvalidInput("[optimizer] scaling must be initial_guess, provided_values or true_values");
  }
  if (o.scaling_reference == ScalingReference::provided_values &&
      o.scale.size() != cfg.initial_guess.size()) {
    throw InvalidInput("[optimizer] scale must have one entry per free parameter");
  }
  o.validate();
}

void read_data(const TomlDocument& doc, ExperimentConfig& cfg) {
  const std::string s = "data";
  DataConfig& d = cfg.data;
  if (auto path = doc.string(s, "observations")) {
    std::filesystem::path p(*path);
    if (p.is_relative()) p = cfg.base_directory / p;
    if (!std::filesystem::exists(p)) {
      throw InvalidInput("[data] observations file '" + p.string() + "' does not exist");
    }
    d.observations = p;
  }
  if (auto times = doc.numbers(s, "observation_times")) {
    d.observation_times = *times;
  } else {
    const double t_end = doc.number(s, "t_end").value_or(10.0);
    const double interval = doc.number(s, "interval").value_or(1.0);
    if (!(t_end > 0.0) || !(interval > 0.0)) throw InvalidInput("[data] t_end and interval must be positive");
    const auto count = static_cast<std::size_t>(std::llround(t_end / interval));
    for (std::size_t i = 0; i <= count; ++i) d.observation_times.push_back(static_cast<double>(i) * interval);
  }
  if (auto dists = doc.strings(s, "noise_distributions")) {
    d.noise_distributions.clear();
    for (const auto& name : *dists) d.noise_distributions.push_back(parse_distribution(name));
  }
  assign(doc.numbers(s, "noise_levels"), d.noise_levels);
  for (double k : d.noise_levels) {
    if (!(k >= 0.0)) throw InvalidInput("[data] noise levels must be >= 0");
  }
  assign_size(doc, s, "replications", d.replications);
  if (d.replications == 0) throw InvalidInput("[data] replications must be >= 1");
  assign(doc.integer(s, "seed"), d.seed);
  if (!d.observations && cfg.model.n_parameters() > 0 && !cfg.true_values) {
    throw InvalidInput("[data] without an observations file, [parameters] true is needed to generate targets");
  }
}

void read_scan(const TomlDocument& doc, ExperimentConfig& cfg) {
  const std::string s = "scan";
  ScanConfig& sc = cfg.scan;
  assign(doc.strings(s, "parameters"), sc.parameters);
  assign(doc.number(s, "relative_range"), sc.relative_range);
  assign_size(doc, s, "points", sc.points);
  assign(doc.numbers(s, "alphas"), sc.alphas);
  assign(doc.numbers(s, "epsilons"), sc.epsilons);
  if (auto forms = doc.strings(s, "forms")) {
    for (const auto& f : *forms) {
      if (f == "sharp") {
        sc.forms.push_back(ObjectiveForm::sharp);
      } else if (f == "phase_field") {
        sc.forms.push_back(ObjectiveForm::phase_field);
      } else {
        throw InvalidInput("[scan] forms entries must be \"sharp\" or \"phase_field\"");
      }
    }
  }
  if (!doc.has_section(s)) return;
  if (sc.parameters.size() != 2) throw InvalidInput("[scan] parameters must name two free parameters");
  const auto names = cfg.model.parameter_names();
  for (const auto& p : sc.parameters) {
    if (std::find(names.begin(), names.end(), p) == names.end()) {
      throw InvalidInput("[scan] '" + p + "' is not a free parameter");
    }
  }
  if (sc.points == 0) throw InvalidInput("[scan] points must be >= 1");
  if (!(sc.relative_range >= 0.0)) throw InvalidInput("[scan] relative_range must be >= 0");
  for (double a : sc.alphas) {
    if (!(a > 0.0)) throw InvalidInput("[scan] alphas must be positive");
  }
  for (double e : sc.epsilons) {
    if (!(e > 0.0)) throw InvalidInput("[scan] epsilons must be positive");
  }
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_directory) {
  const TomlDocument doc = TomlDocument::parse(text);
  ExperimentConfig cfg;
  cfg.base_directory = base_directory;
  read_forward(doc, cfg);
  read_model(doc, cfg);
  read_parameters(doc, cfg);
  read_objective(doc, cfg);
  read_optimizer(doc, cfg);
  read_data(doc, cfg);
  read_scan(doc, cfg);
  if (auto dir = doc.string("output", "directory")) {
    std::filesystem::path p(*dir);
    cfg.output = p.is_relative() ? base_directory / p : p;
  } else {
    cfg.output = base_directory / cfg.output;
  }

  cfg.forward.validate();
  cfg.model.validate();
  const auto unused = doc.unused_keys();
  if (!unused.empty()) {
    std::string list;
    for (const auto& k : unused) list += (list.empty() ? "" : ", ") + k;
    throw InvalidInput("unknown config keys: " + list);
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open config '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  try {
    return parse_config(os.str(), path.parent_path().empty() ? "." : path.parent_path());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ", " + e.path(), e.message());
  }
}

}  // namespace cellfit::cli
