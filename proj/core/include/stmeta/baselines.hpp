#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "stmeta/timeseries.hpp"

namespace stmeta::baselines {

enum class HMMode { TC, TM };

std::string_view to_string(HMMode mode);

struct HMConfig {
  HMMode mode = HMMode::TC;
  std::size_t closeness = 6;  // most recent lags averaged; must not exceed the sample window
};

/// Historical mean. TC: mean of the last `closeness` lags. TM: mean of
/// {closeness mean, last-day value, last-week value}. Returns S×n values.
std::vector<double> hm_predict(const timeseries::FactorSampleSet& samples, const HMConfig& cfg);

/// One location's autoregressive fit: x_t ≈ intercept + Σ_j coef[j]·x_{t-p+j}.
struct ARSeriesModel {
  std::vector<double> coef;  // oldest lag first
  double intercept = 0.0;
  bool degenerate = false;   // near-constant training series; predicts the window mean
};

struct ARModel {
  std::size_t order = 6;
  std::vector<ARSeriesModel> locations;
};

inline constexpr double kARRidge = 1e-8;

/// Ordinary least squares on all one-step transitions of `train`; the normal
/// equations carry a ridge floor on the lag coefficients.
ARSeriesModel ar_fit_series(std::span<const double> train, std::size_t order);
ARModel ar_fit(const timeseries::TrafficTensor& t, timeseries::SlotRange train, std::size_t order = 6);

/// `window` holds at least `coef.size()` values, oldest first; the last ones are used.
double ar_predict(const ARSeriesModel& m, std::span<const double> window);
/// Predictions for the given target slots, S×n, using the slots immediately before each.
std::vector<double> ar_predict(const ARModel& m, const timeseries::TrafficTensor& t,
                               std::span<const std::size_t> target_slots);

}  // namespace stmeta::baselines
