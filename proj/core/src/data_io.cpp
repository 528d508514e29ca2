#include "cellfit/data_io.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "cellfit/errors.hpp"

namespace cellfit {

using nlohmann::json;

ObservationSet observations_from_trajectory(const Trajectory& traj) {
  ObservationSet obs;
  for (const Snapshot& s : traj.snapshots) {
    obs.snapshots.push_back(
        {s.time, std::vector<Vec2>(s.curve.vertices().begin(), s.curve.vertices().end()), true,
         s.fields});
  }
  return obs;
}

ObservationSet generate_targets(const ModelSpec& spec, const SolverConfig& config,
                                std::span<const double> c_true, const Curve& curve,
                                const VertexField& fields, std::span<const double> times) {
  spec.validate();
  const Model model = bind_parameters(spec, c_true);
  ObservationSet obs = observations_from_trajectory(simulate(curve, fields, config, model, times));
  obs.metadata.c_true = std::vector<double>(c_true.begin(), c_true.end());
  obs.metadata.parameter_names = spec.parameter_names();
  return obs;
}

namespace {

json points_to_json(PointSpan points) {
  json arr = json::array();
  for (const Vec2& p : points) arr.push_back({p.x, p.y});
  return arr;
}

json fields_to_json(const VertexField& f) {
  json arr = json::array();
  for (std::size_t k = 0; k < f.n_species(); ++k) {
    const auto s = f.species(k);
    arr.push_back(std::vector<double>(s.begin(), s.end()));
  }
  return arr;
}

// Schema-checked accessors reporting a JSON path on failure.
const json& member(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) throw ParseError(path, "expected an object");
  const auto it = j.find(key);
  if (it == j.end()) throw ParseError(path, "missing key '" + key + "'");
  return *it;
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ParseError(path, "expected a number");
  return j.get<double>();
}

const json& array(const json& j, const std::string& path) {
  if (!j.is_array()) throw ParseError(path, "expected an array");
  return j;
}

std::vector<double> numbers(const json& j, const std::string& path) {
  std::vector<double> out;
  const json& arr = array(j, path);
  for (std::size_t i = 0; i < arr.size(); ++i) {
    out.push_back(number(arr[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw InvalidInput("write to '" + path.string() + "' failed");
}

}  // namespace

std::string observations_to_json(const ObservationSet& obs) {
  json root;
  root["times"] = obs.times();
  json snaps = json::array();
  for (const ObsSnapshot& s : obs.snapshots) {
    snaps.push_back({{"t", s.time},
                     {"points", points_to_json(s.points)},
                     {"ordered", s.ordered},
                     {"fields", fields_to_json(s.fields)}});
  }
  root["snapshots"] = std::move(snaps);
  json meta = json::object();
  const ObservationMetadata& m = obs.metadata;
  if (m.c_true) meta["c_true"] = *m.c_true;
  if (!m.parameter_names.empty()) meta["parameter_names"] = m.parameter_names;
  if (m.seed) meta["seed"] = *m.seed;
  if (m.units) meta["units"] = *m.units;
  if (m.rng) meta["rng"] = *m.rng;
  root["metadata"] = std::move(meta);
  return root.dump(1) + "\n";
}

ObservationSet observations_from_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("$", e.what());
  }
  ObservationSet obs;
  const std::vector<double> times = numbers(member(root, "times", "$"), "$.times");
  const json& snaps = array(member(root, "snapshots", "$"), "$.snapshots");
  if (snaps.size() != times.size()) {
    throw ParseError("$.snapshots", "has " + std::to_string(snaps.size()) + " entries but times has " +
                                        std::to_string(times.size()));
  }
  for (std::size_t i = 0; i < snaps.size(); ++i) {
    const std::string at = "$.snapshots[" + std::to_string(i) + "]";
    ObsSnapshot s;
    s.time = number(member(snaps[i], "t", at), at + ".t");
    if (s.time != times[i]) throw ParseError(at + ".t", "differs from times[" + std::to_string(i) + "]");
    const json& pts = array(member(snaps[i], "points", at), at + ".points");
    for (std::size_t k = 0; k < pts.size(); ++k) {
      const std::string pk = at + ".points[" + std::to_string(k) + "]";
      const std::vector<double> xy = numbers(pts[k], pk);
      if (xy.size() != 2) throw ParseError(pk, "expected [x, y]");
      s.points.push_back({xy[0], xy[1]});
    }
    if (snaps[i].contains("ordered")) {
      const json& ordered = snaps[i]["ordered"];
      if (!ordered.is_boolean()) throw ParseError(at + ".ordered", "expected a boolean");
      s.ordered = ordered.get<bool>();
    }
    std::vector<std::vector<double>> species;
    const json& fields = array(member(snaps[i], "fields", at), at + ".fields");
    for (std::size_t k = 0; k < fields.size(); ++k) {
      const std::string fk = at + ".fields[" + std::to_string(k) + "]";
      species.push_back(numbers(fields[k], fk));
      if (species.back().size() != s.points.size()) {
        throw ParseError(fk, "snapshot " + std::to_string(i) + " has " +
                                 std::to_string(species.back().size()) + " values for " +
                                 std::to_string(s.points.size()) + " points");
      }
    }
    s.fields = VertexField(std::move(species));
    obs.snapshots.push_back(std::move(s));
  }
  if (root.contains("metadata")) {
    const json& meta = root["metadata"];
    if (!meta.is_object()) throw ParseError("$.metadata", "expected an object");
    if (meta.contains("c_true")) obs.metadata.c_true = numbers(meta["c_true"], "$.metadata.c_true");
    if (meta.contains("parameter_names")) {
      const json& names = array(meta["parameter_names"], "$.metadata.parameter_names");
      for (std::size_t k = 0; k < names.size(); ++k) {
        if (!names[k].is_string()) {
          throw ParseError("$.metadata.parameter_names[" + std::to_string(k) + "]", "expected a string");
        }
        obs.metadata.parameter_names.push_back(names[k].get<std::string>());
      }
    }
    if (meta.contains("seed")) {
      if (!meta["seed"].is_number_unsigned()) throw ParseError("$.metadata.seed", "expected an unsigned integer");
      obs.metadata.seed = meta["seed"].get<std::uint64_t>();
    }
    for (const char* key : {"units", "rng"}) {
      if (!meta.contains(key)) continue;
      if (!meta[key].is_string()) throw ParseError(std::string("$.metadata.") + key, "expected a string");
      (std::string(key) == "units" ? obs.metadata.units : obs.metadata.rng) = meta[key].get<std::string>();
    }
  }
  try {
    obs.validate();
  } catch (const InvalidInput& e) {
    throw ParseError("$", e.what());
  }
  return obs;
}

void save_observations(const ObservationSet& obs, const std::filesystem::path& path) {
  write_file(path, observations_to_json(obs));
}

ObservationSet load_observations(const std::filesystem::path& path) {
  try {
    return observations_from_json(read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(e.path(), e.message() + " (in " + path.string() + ")");
  }
}

std::string trajectory_to_json(const Trajectory& traj) {
  json root;
  root["dt"] = traj.dt;
  root["remesh_events"] = traj.remesh_events;
  json times = json::array();
  json snaps = json::array();
  for (const Snapshot& s : traj.snapshots) {
    times.push_back(s.time);
    snaps.push_back({{"t", s.time},
                     {"vertices", points_to_json(s.curve.vertices())},
                     {"fields", fields_to_json(s.fields)}});
  }
  root["times"] = std::move(times);
  root["snapshots"] = std::move(snaps);
  return root.dump(1) + "\n";
}

void save_trajectory(const Trajectory& traj, const std::filesystem::path& path) {
  write_file(path, trajectory_to_json(traj));
}

}  // namespace cellfit
