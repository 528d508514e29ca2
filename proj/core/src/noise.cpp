#include <algorithm>
#include <cmath>
#include <numbers>

#include "cellfit/data_io.hpp"
#include "cellfit/detail/philox.hpp"
#include "cellfit/errors.hpp"

namespace cellfit {

namespace {

// 53-bit uniforms in [0, 1) and (0, 1].
double unit_closed_open(std::uint64_t x) { return static_cast<double>(x >> 11) * 0x1.0p-53; }
double unit_open_closed(std::uint64_t x) { return static_cast<double>((x >> 11) + 1) * 0x1.0p-53; }

}  // namespace

double noise_draw(NoiseDistribution distribution, std::uint64_t seed, std::uint64_t snapshot,
                  std::uint64_t point, std::uint64_t component) {
  const auto block = detail::philox4x64_10({snapshot, point, component, 0}, {seed, 0});
  if (distribution == NoiseDistribution::uniform) {
    return std::numbers::sqrt3 * (2.0 * unit_closed_open(block[0]) - 1.0);
  }
  const double u1 = unit_open_closed(block[0]);
  const double u2 = unit_closed_open(block[1]);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

ObservationSet add_noise(const ObservationSet& obs, const NoiseSpec& spec) {
  if (!(spec.standard_deviation >= 0.0) || !std::isfinite(spec.standard_deviation)) {
    throw InvalidInput("noise standard deviation must be finite and >= 0");
  }
  ObservationSet out = obs;
  out.metadata.seed = spec.seed;
  out.metadata.rng = noise_rng_name;
  const double kn = spec.standard_deviation;
  if (kn == 0.0) return out;

  auto range = [](auto&& values) {
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    return lo == values.end() ? 0.0 : *hi - *lo;
  };

  for (std::size_t i = 1; i < obs.snapshots.size(); ++i) {
    const ObsSnapshot& clean = obs.snapshots[i];
    ObsSnapshot& noisy = out.snapshots[i];
    std::vector<double> xs, ys;
    for (const Vec2& p : clean.points) {
      xs.push_back(p.x);
      ys.push_back(p.y);
    }
    const double rx = range(xs);
    const double ry = range(ys);
    for (std::size_t k = 0; k < clean.points.size(); ++k) {
      noisy.points[k].x += kn * noise_draw(spec.distribution, spec.seed, i, k, 0) * rx;
      noisy.points[k].y += kn * noise_draw(spec.distribution, spec.seed, i, k, 1) * ry;
    }
    for (std::size_t s = 0; s < clean.fields.n_species(); ++s) {
      const double rs = range(clean.fields.species(s));
      for (std::size_t k = 0; k < clean.points.size(); ++k) {
        noisy.fields(s, k) += kn * noise_draw(spec.distribution, spec.seed, i, k, 2 + s) * rs;
      }
    }
  }
  return out;
}

}  // namespace cellfit
