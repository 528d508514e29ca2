#include "cellfit/observations.hpp"

#include <cmath>

#include "cellfit/errors.hpp"

namespace cellfit {

std::vector<double> ObservationSet::times() const {
  std::vector<double> t;
  t.reserve(snapshots.size());
  for (const auto& s : snapshots) t.push_back(s.time);
  return t;
}

bool ObservationSet::all_ordered() const noexcept {
  for (const auto& s : snapshots) {
    if (!s.ordered) return false;
  }
  return true;
}

void ObservationSet::validate() const {
  if (snapshots.size() < 2) {
    throw InvalidInput("observations need the initial snapshot and at least one more");
  }
  const std::size_t n_species = snapshots.front().fields.n_species();
  for (std::size_t i = 0; i < snapshots.size(); ++i) {
    const ObsSnapshot& s = snapshots[i];
    const std::string at = "snapshot " + std::to_string(i) + ": ";
    if (!std::isfinite(s.time)) throw InvalidInput(at + "time is not finite");
    if (i > 0 && !(s.time > snapshots[i - 1].time)) {
      throw InvalidInput(at + "times must be strictly increasing");
    }
    if (s.points.empty()) throw InvalidInput(at + "no points");
    for (const Vec2& p : s.points) {
      if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw InvalidInput(at + "non-finite point");
    }
    if (s.fields.n_species() != n_species) {
      throw InvalidInput(at + "species count differs from snapshot 0");
    }
    for (std::size_t k = 0; k < n_species; ++k) {
      if (s.fields.species(k).size() != s.points.size()) {
        throw InvalidInput(at + "field " + std::to_string(k) + " has " +
                           std::to_string(s.fields.species(k).size()) + " values for " +
                           std::to_string(s.points.size()) + " points");
      }
      for (double v : s.fields.species(k)) {
        if (!std::isfinite(v)) throw InvalidInput(at + "non-finite concentration");
      }
    }
  }
  if (metadata.c_true && !metadata.parameter_names.empty() &&
      metadata.c_true->size() != metadata.parameter_names.size()) {
    throw InvalidInput("metadata: c_true and parameter_names differ in length");
  }
}

}  // namespace cellfit
