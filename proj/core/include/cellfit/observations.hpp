#pragma once

// Observed data (Gamma-hat(t^i), a-hat(., t^i)), i = 0..n_s. Snapshot 0 only
// provides initial data; snapshots 1..n_s enter the residual vector.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cellfit/geometry.hpp"

namespace cellfit {

struct ObsSnapshot {
  double time = 0.0;
  std::vector<Vec2> points;
  // True when consecutive points are joined, closing back to point 0.
  bool ordered = true;
  // One row per species, one entry per point.
  VertexField fields;

  friend bool operator==(const ObsSnapshot&, const ObsSnapshot&) = default;
};

struct ObservationMetadata {
  std::optional<std::vector<double>> c_true;
  std::vector<std::string> parameter_names;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> units;
  std::optional<std::string> rng;

  friend bool operator==(const ObservationMetadata&, const ObservationMetadata&) = default;
};

struct ObservationSet {
  std::vector<ObsSnapshot> snapshots;
  ObservationMetadata metadata;

  // n_s: snapshots used in the fit.
  std::size_t n_fit() const noexcept { return snapshots.empty() ? 0 : snapshots.size() - 1; }
  std::size_t n_species() const noexcept {
    return snapshots.empty() ? 0 : snapshots.front().fields.n_species();
  }
  std::vector<double> times() const;
  bool all_ordered() const noexcept;

  // Throws InvalidInput naming the offending snapshot: fewer than two
  // snapshots, non-increasing times, empty point clouds, non-finite values,
  // field rows not matching the point count, or species count changing.
  void validate() const;

  friend bool operator==(const ObservationSet&, const ObservationSet&) = default;
};

}  // namespace cellfit
