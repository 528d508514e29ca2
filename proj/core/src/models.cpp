#include "cellfit/models.hpp"

#include <algorithm>
#include <charconv>
#include <optional>
#include <set>

#include "cellfit/errors.hpp"

namespace cellfit {

std::array<double, 2> schnakenberg(std::array<double, 2> a, double gamma, double k1, double k2) {
  const double a1a1a2 = a[0] * a[0] * a[1];
  return {gamma * (k1 - a[0] + a1a1a2), gamma * (k2 - a1a1a2)};
}

std::array<double, 2> steady_state(double /*gamma*/, double k1, double k2) {
  const double sum = k1 + k2;
  if (sum == 0.0) throw InvalidInput("steady state undefined for k1 + k2 = 0");
  return {sum, k2 / (sum * sum)};
}

double proportional_forcing(std::span<const double> a, std::span<const double> kp) {
  if (a.size() != kp.size()) {
    throw InvalidInput("forcing coefficient count does not match the species count");
  }
  double g = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) g += kp[i] * a[i];
  return g;
}

double yeast_forcing(double eta, double k1, double k2, double k_reg, bool smoothstep_transition) {
  if (eta <= k1) return 0.0;
  if (eta >= k1 + k_reg) return k2;
  const double s = (eta - k1) / k_reg;
  if (smoothstep_transition) return k2 * s * s * (3.0 - 2.0 * s);
  const double ramp = s * (3.0 - 2.0 * s);
  return k2 * ramp * ramp;
}

void Model::reaction(std::span<const double> a, std::span<double> out) const {
  std::visit(
      [&](const auto& k) {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, Schnakenberg>) {
          const auto f = schnakenberg({a[0], a[1]}, k.gamma, k.k1, k.k2);
          out[0] = f[0];
          out[1] = f[1];
          for (std::size_t i = 2; i < out.size(); ++i) out[i] = 0.0;
        } else {
          std::fill(out.begin(), out.end(), 0.0);
        }
      },
      kinetics);
}

double Model::normal_forcing(std::span<const double> a) const {
  return std::visit(
      [&](const auto& g) -> double {
        using G = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<G, ProportionalForcing>) {
          if (g.kp.empty()) return 0.0;
          return proportional_forcing(a, g.kp);
        } else {
          return yeast_forcing(a[g.species], g.k1, g.k2, g.k_reg, g.smoothstep_transition);
        }
      },
      forcing);
}

namespace {

// Parses "<prefix><1-based index>" into a 0-based index.
std::optional<std::size_t> indexed_slot(std::string_view slot, std::string_view prefix) {
  if (!slot.starts_with(prefix)) return std::nullopt;
  const std::string_view digits = slot.substr(prefix.size());
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (ec != std::errc{} || ptr != digits.data() + digits.size() || value == 0) return std::nullopt;
  return value - 1;
}

double* slot_ref(Model& model, std::string_view slot) {
  PhysicalConstants& p = model.physics;
  if (slot == "sigma") return &p.surface_tension;
  if (slot == "k_b") return &p.bending_rigidity;
  if (slot == "lambda") return &p.volume_penalty;
  if (auto i = indexed_slot(slot, "D_")) {
    return *i < p.diffusion.size() ? &p.diffusion[*i] : nullptr;
  }
  if (auto* schnak = std::get_if<Schnakenberg>(&model.kinetics)) {
    if (slot == "gamma") return &schnak->gamma;
    if (slot == "k1") return &schnak->k1;
    if (slot == "k2") return &schnak->k2;
  }
  if (auto* prop = std::get_if<ProportionalForcing>(&model.forcing)) {
    if (auto i = indexed_slot(slot, "kp_")) {
      return *i < prop->kp.size() ? &prop->kp[*i] : nullptr;
    }
  }
  if (auto* yeast = std::get_if<YeastForcing>(&model.forcing)) {
    if (slot == "yeast_k1") return &yeast->k1;
    if (slot == "yeast_k2") return &yeast->k2;
    if (slot == "k_reg") return &yeast->k_reg;
  }
  return nullptr;
}

}  // namespace

bool is_known_slot(const Model& model, std::string_view slot) {
  Model copy = model;
  return slot_ref(copy, slot) != nullptr;
}

double read_slot(const Model& model, std::string_view slot) {
  Model copy = model;
  const double* ref = slot_ref(copy, slot);
  if (ref == nullptr) throw InvalidInput("unknown model slot '" + std::string(slot) + "'");
  return *ref;
}

void write_slot(Model& model, std::string_view slot, double value) {
  double* ref = slot_ref(model, slot);
  if (ref == nullptr) throw InvalidInput("unknown model slot '" + std::string(slot) + "'");
  *ref = value;
}

std::vector<double> ModelSpec::lower_bounds() const {
  std::vector<double> lo(free_parameters.size());
  for (const auto& p : free_parameters) lo.at(p.index) = p.lower;
  return lo;
}

std::vector<double> ModelSpec::upper_bounds() const {
  std::vector<double> hi(free_parameters.size());
  for (const auto& p : free_parameters) hi.at(p.index) = p.upper;
  return hi;
}

std::vector<std::string> ModelSpec::parameter_names() const {
  std::vector<std::string> names(free_parameters.size());
  for (const auto& p : free_parameters) names.at(p.index) = p.slot;
  return names;
}

void ModelSpec::validate() const {
  const Model model = base_model(*this);
  std::set<std::string> seen_slots;
  std::vector<bool> seen_index(free_parameters.size(), false);
  for (const auto& p : free_parameters) {
    if (!is_known_slot(model, p.slot)) {
      throw InvalidInput("free parameter '" + p.slot + "' does not name a slot of this model");
    }
    if (!seen_slots.insert(p.slot).second) {
      throw InvalidInput("free parameter '" + p.slot + "' is bound twice");
    }
    if (p.index >= free_parameters.size() || seen_index[p.index]) {
      throw InvalidInput("free parameter indices must be a permutation of 0..n_p-1");
    }
    seen_index[p.index] = true;
    if (!(p.lower <= p.upper)) {
      throw InvalidInput("free parameter '" + p.slot + "' has lower bound above upper bound");
    }
  }
  if (auto* prop = std::get_if<ProportionalForcing>(&forcing)) {
    if (!prop->kp.empty() && prop->kp.size() != physics.diffusion.size()) {
      throw InvalidInput("kp must have one coefficient per species");
    }
  }
  if (std::holds_alternative<Schnakenberg>(kinetics) && physics.diffusion.size() != 2) {
    throw InvalidInput("Schnakenberg kinetics need exactly two species");
  }
  if (auto* yeast = std::get_if<YeastForcing>(&forcing)) {
    if (yeast->species >= physics.diffusion.size()) {
      throw InvalidInput("yeast forcing species index out of range");
    }
  }
}

Model base_model(const ModelSpec& spec) {
  return Model{spec.kinetics, spec.forcing, spec.physics};
}

Model bind_parameters(const ModelSpec& spec, std::span<const double> c) {
  if (c.size() != spec.free_parameters.size()) {
    throw InvalidInput("parameter vector has " + std::to_string(c.size()) + " entries, model has " +
                       std::to_string(spec.free_parameters.size()) + " free parameters");
  }
  Model model = base_model(spec);
  for (const auto& p : spec.free_parameters) {
    const double v = c[p.index];
    if (!(v >= p.lower && v <= p.upper)) {
      throw InvalidInput("parameter '" + p.slot + "' = " + std::to_string(v) +
                         " lies outside its box");
    }
    write_slot(model, p.slot, v);
  }
  return model;
}

}  // namespace cellfit
