#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "stmeta/bench.hpp"

namespace stmeta::bench {

namespace {

constexpr std::size_t kBurnIn = 100;

double km_to_lat_degrees(double km) { return km * 1000.0 / graphkit::kEarthRadiusMeters * 180.0 / std::numbers::pi; }

}  // namespace

void SynthSpec::validate() const {
  if (nodes < 2) throw ValidationError("synth: nodes must be at least 2");
  if (slots < 10) throw ValidationError("synth: slots must be at least 10");
  if (slot_minutes <= 0 || 1440 % slot_minutes != 0) throw ValidationError("synth: slot_minutes must divide a day");
  if (daily_amplitude < 0.0 || weekly_amplitude < 0.0 || noise_sigma < 0.0) {
    throw ValidationError("synth: amplitudes and noise_sigma must be non-negative");
  }
  if (daily_harmonics == 0) throw ValidationError("synth: daily_harmonics must be at least 1");
  if (std::abs(ar_coefficient) + std::abs(coupling) >= 1.0) {
    throw ValidationError("synth: |ar_coefficient| + |coupling| must be below 1 for a stable process");
  }
  if (!(area_km > 0.0) || !(proximity_m > 0.0)) throw ValidationError("synth: area_km and proximity_m must be positive");
  graphkit::GeoPoint corner{origin_lat, origin_lon};
  graphkit::validate_coordinates(std::span<const graphkit::GeoPoint>(&corner, 1));
  if (std::abs(origin_lat) + km_to_lat_degrees(area_km) > 85.0) throw ValidationError("synth: area too close to a pole");
}

SynthDataset synth_generate(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t n = spec.nodes;

  const double lat_span = km_to_lat_degrees(spec.area_km);
  const double lon_span = lat_span / std::cos(spec.origin_lat * std::numbers::pi / 180.0);
  SynthDataset out;
  std::vector<graphkit::GeoPoint> coords(n);
  for (std::size_t i = 0; i < n; ++i) {
    coords[i] = {spec.origin_lat + unit(rng) * lat_span, spec.origin_lon + unit(rng) * lon_span};
    out.stations.add({"s" + std::to_string(i + 1), coords[i], {}});
  }
  out.planted = graphkit::build_proximity_graph(coords, spec.proximity_m);

  const double two_pi = 2.0 * std::numbers::pi;
  std::vector<std::vector<double>> daily_phase(n, std::vector<double>(spec.daily_harmonics));
  std::vector<double> weekly_phase(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& p : daily_phase[i]) p = two_pi * unit(rng);
    weekly_phase[i] = two_pi * unit(rng);
  }

  std::vector<std::vector<std::size_t>> neighbors(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (out.planted.has_edge(i, j)) neighbors[i].push_back(j);
    }
  }

  const double per_day = static_cast<double>(1440 / spec.slot_minutes);
  const double per_week = 7.0 * per_day;
  std::vector<double> r(n, 0.0), next(n);
  auto step = [&] {
    for (std::size_t i = 0; i < n; ++i) {
      double mix = 0.0;
      for (std::size_t j : neighbors[i]) mix += r[j];
      if (!neighbors[i].empty()) mix /= static_cast<double>(neighbors[i].size());
      next[i] = spec.ar_coefficient * r[i] + spec.coupling * mix + spec.noise_sigma * normal(rng);
    }
    r.swap(next);
  };
  for (std::size_t b = 0; b < kBurnIn; ++b) step();

  std::vector<double> data(spec.slots * n);
  for (std::size_t t = 0; t < spec.slots; ++t) {
    step();
    const double td = static_cast<double>(t);
    for (std::size_t i = 0; i < n; ++i) {
      double v = spec.base + r[i];
      for (std::size_t k = 1; k <= spec.daily_harmonics; ++k) {
        const double kd = static_cast<double>(k);
        v += spec.daily_amplitude / kd * std::sin(two_pi * kd * td / per_day + daily_phase[i][k - 1]);
      }
      v += spec.weekly_amplitude * std::sin(two_pi * td / per_week + weekly_phase[i]);
      if (spec.clamp_non_negative) v = std::max(0.0, v);
      data[t * n + i] = v;
    }
  }
  out.tensor = timeseries::TrafficTensor::make(spec.slots, n, std::move(data), spec.slot_minutes, spec.origin,
                                               out.stations.ids());
  return out;
}

}  // namespace stmeta::bench
