#include "stmeta/baselines.hpp"

#include <Eigen/Dense>
#include <numeric>

#include "stmeta/errors.hpp"

namespace stmeta::baselines {

namespace {

constexpr double kDegenerateVariance = 1e-12;

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

std::string_view to_string(HMMode mode) { return mode == HMMode::TC ? "HM(TC)" : "HM(TM)"; }

std::vector<double> hm_predict(const timeseries::FactorSampleSet& samples, const HMConfig& cfg) {
  if (cfg.closeness == 0) throw PreconditionError("HM needs a closeness window of at least 1");
  if (samples.closeness_lags < cfg.closeness) {
    throw PreconditionError("HM closeness window " + std::to_string(cfg.closeness) + " exceeds the " +
                            std::to_string(samples.closeness_lags) + " available lags");
  }
  if (cfg.mode == HMMode::TM && (samples.daily_lags == 0 || samples.weekly_lags == 0)) {
    throw PreconditionError("HM(TM) needs daily and weekly windows");
  }
  const std::size_t n = samples.locations;
  std::vector<double> out(samples.samples * n);
  for (std::size_t s = 0; s < samples.samples; ++s) {
    for (std::size_t i = 0; i < n; ++i) {
      double c = 0.0;
      for (std::size_t l = samples.closeness_lags - cfg.closeness; l < samples.closeness_lags; ++l) {
        c += samples.closeness(s, i, l);
      }
      c /= static_cast<double>(cfg.closeness);
      if (cfg.mode == HMMode::TC) {
        out[s * n + i] = c;
      } else {
        const double day = samples.daily(s, i, samples.daily_lags - 1);
        const double week = samples.weekly(s, i, samples.weekly_lags - 1);
        out[s * n + i] = (c + day + week) / 3.0;
      }
    }
  }
  return out;
}

ARSeriesModel ar_fit_series(std::span<const double> train, std::size_t order) {
  if (train.size() <= order + 1) {
    throw PreconditionError("AR(" + std::to_string(order) + ") needs more than " + std::to_string(order + 1) +
                            " training values");
  }
  ARSeriesModel m;
  const double mu = mean_of(train);
  double var = 0.0;
  for (double v : train) var += (v - mu) * (v - mu);
  var /= static_cast<double>(train.size());
  if (var < kDegenerateVariance) {
    m.degenerate = true;
    m.coef.assign(order, 0.0);
    m.intercept = mu;
    return m;
  }

  const auto p = static_cast<Eigen::Index>(order);
  const auto rows = static_cast<Eigen::Index>(train.size() - order);
  Eigen::MatrixXd X(rows, p + 1);
  Eigen::VectorXd y(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    X(r, 0) = 1.0;
    for (Eigen::Index j = 0; j < p; ++j) X(r, j + 1) = train[static_cast<std::size_t>(r + j)];
    y(r) = train[static_cast<std::size_t>(r + p)];
  }
  Eigen::MatrixXd gram = X.transpose() * X;
  for (Eigen::Index j = 1; j <= p; ++j) gram(j, j) += kARRidge;
  const Eigen::VectorXd beta = gram.ldlt().solve(X.transpose() * y);
  m.intercept = beta(0);
  m.coef.resize(order);
  for (Eigen::Index j = 0; j < p; ++j) m.coef[static_cast<std::size_t>(j)] = beta(j + 1);
  return m;
}

ARModel ar_fit(const timeseries::TrafficTensor& t, timeseries::SlotRange train, std::size_t order) {
  if (train.end > t.slots) throw PreconditionError("AR training range exceeds the tensor");
  ARModel model;
  model.order = order;
  std::vector<double> series(train.size());
  for (std::size_t i = 0; i < t.locations; ++i) {
    for (std::size_t s = train.begin; s < train.end; ++s) series[s - train.begin] = t.at(s, i);
    model.locations.push_back(ar_fit_series(series, order));
  }
  return model;
}

double ar_predict(const ARSeriesModel& m, std::span<const double> window) {
  const std::size_t p = m.coef.size();
  if (window.size() < p) throw PreconditionError("AR window shorter than the model order");
  const auto recent = window.subspan(window.size() - p);
  if (m.degenerate) return p == 0 ? m.intercept : mean_of(recent);
  double v = m.intercept;
  for (std::size_t j = 0; j < p; ++j) v += m.coef[j] * recent[j];
  return v;
}

std::vector<double> ar_predict(const ARModel& m, const timeseries::TrafficTensor& t,
                               std::span<const std::size_t> target_slots) {
  if (m.locations.size() != t.locations) throw ShapeError("AR model and tensor disagree on location count");
  const std::size_t n = t.locations;
  std::vector<double> out(target_slots.size() * n);
  std::vector<double> window(m.order);
  for (std::size_t s = 0; s < target_slots.size(); ++s) {
    const std::size_t slot = target_slots[s];
    if (slot < m.order || slot > t.slots) throw PreconditionError("AR target slot lacks history");
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m.order; ++j) window[j] = t.at(slot - m.order + j, i);
      out[s * n + i] = ar_predict(m.locations[i], window);
    }
  }
  return out;
}

}  // namespace stmeta::baselines
