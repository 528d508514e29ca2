#pragma once

// Model components for the coupled evolution law / surface reaction-diffusion
// system: reaction kinetics f(a), normal forcing g(a), the physical constants,
// and the binding of a free parameter vector c onto named slots.
//
// Slot names accepted by bind_parameters:
//   sigma, k_b, lambda, D_<i>       physical constants (i is 1-based)
//   kp_<i>                          proportional forcing coefficients
//   gamma, k1, k2                   Schnakenberg kinetics
//   yeast_k1, yeast_k2, k_reg       thresholded yeast forcing

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace cellfit {

struct PhysicalConstants {
  double surface_tension = 5e-3;   // sigma
  double bending_rigidity = 1e-2;  // k_b
  double volume_penalty = 1.0;     // lambda
  std::vector<double> diffusion{1.0, 100.0};

  friend bool operator==(const PhysicalConstants&, const PhysicalConstants&) = default;
};

struct NoKinetics {
  friend bool operator==(const NoKinetics&, const NoKinetics&) = default;
};

// Activator-depleted substrate kinetics.
struct Schnakenberg {
  double gamma = 20.0;
  double k1 = 0.1;
  double k2 = 0.9;
  friend bool operator==(const Schnakenberg&, const Schnakenberg&) = default;
};

using Kinetics = std::variant<NoKinetics, Schnakenberg>;

// g(a) = k_p . a
struct ProportionalForcing {
  std::vector<double> kp{-1e-2, 5e-2};
  friend bool operator==(const ProportionalForcing&, const ProportionalForcing&) = default;
};

// Threshold growth driven by one species. The default transition is the
// squared polynomial ((s)(3 - 2s))^2; smoothstep_transition switches to the
// monotone s^2 (3 - 2s).
struct YeastForcing {
  double k1 = 0.2;
  double k2 = 1e-2;
  double k_reg = 5e-2;
  bool smoothstep_transition = false;
  std::size_t species = 0;
  friend bool operator==(const YeastForcing&, const YeastForcing&) = default;
};

using Forcing = std::variant<ProportionalForcing, YeastForcing>;

std::array<double, 2> schnakenberg(std::array<double, 2> a, double gamma, double k1, double k2);

// Homogeneous steady state (k1 + k2, k2 / (k1 + k2)^2); independent of gamma.
std::array<double, 2> steady_state(double gamma, double k1, double k2);

double proportional_forcing(std::span<const double> a, std::span<const double> kp);

double yeast_forcing(double eta, double k1, double k2, double k_reg,
                     bool smoothstep_transition = false);

struct FreeParameter {
  std::string slot;
  std::size_t index = 0;  // position in c
  double lower = 0.0;
  double upper = 0.0;
};

struct ModelSpec {
  Kinetics kinetics = Schnakenberg{};
  Forcing forcing = ProportionalForcing{};
  PhysicalConstants physics;
  std::vector<FreeParameter> free_parameters;

  std::size_t n_parameters() const noexcept { return free_parameters.size(); }
  std::vector<double> lower_bounds() const;
  std::vector<double> upper_bounds() const;
  // Slot names ordered by their index in c.
  std::vector<std::string> parameter_names() const;

  // Throws InvalidInput on unknown or duplicate slots, a non-permutation of
  // indices, or an inverted box.
  void validate() const;
};

// A model with every slot resolved to a number.
struct Model {
  Kinetics kinetics = NoKinetics{};
  Forcing forcing = ProportionalForcing{{}};
  PhysicalConstants physics;

  std::size_t n_species() const noexcept { return physics.diffusion.size(); }

  // f(a) for one vertex; out has n_species entries.
  void reaction(std::span<const double> a, std::span<double> out) const;
  double normal_forcing(std::span<const double> a) const;

  friend bool operator==(const Model&, const Model&) = default;
};

// Model with the ModelSpec constants and no free parameters applied.
Model base_model(const ModelSpec& spec);

// Resolves c into the model slots. Throws InvalidInput if |c| != n_p or c
// leaves the box.
Model bind_parameters(const ModelSpec& spec, std::span<const double> c);

double read_slot(const Model& model, std::string_view slot);
void write_slot(Model& model, std::string_view slot, double value);
bool is_known_slot(const Model& model, std::string_view slot);

}  // namespace cellfit
