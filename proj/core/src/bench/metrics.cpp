#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "stmeta/bench.hpp"

namespace stmeta::bench {

DegenerateColumnError::DegenerateColumnError(std::size_t dataset)
    : ValidationError("dataset column " + std::to_string(dataset) + " has a best RMSE of zero; NRMSE is undefined"),
      dataset_(dataset) {}

double rmse(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) {
    throw ShapeError("rmse: " + std::to_string(pred.size()) + " predictions vs " + std::to_string(truth.size()) +
                     " targets");
  }
  if (pred.empty()) throw PreconditionError("rmse needs at least one cell");
  double acc = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) acc += (pred[k] - truth[k]) * (pred[k] - truth[k]);
  return std::sqrt(acc / static_cast<double>(pred.size()));
}

std::vector<double> rmse_per_location(std::span<const double> pred, std::span<const double> truth,
                                      std::size_t locations) {
  if (pred.size() != truth.size() || locations == 0 || pred.size() % locations != 0) {
    throw ShapeError("rmse_per_location: sizes do not form S×n blocks");
  }
  const std::size_t samples = pred.size() / locations;
  if (samples == 0) throw PreconditionError("rmse needs at least one cell");
  std::vector<double> out(locations, 0.0);
  for (std::size_t s = 0; s < samples; ++s) {
    for (std::size_t i = 0; i < locations; ++i) {
      const double d = pred[s * locations + i] - truth[s * locations + i];
      out[i] += d * d;
    }
  }
  for (auto& v : out) v = std::sqrt(v / static_cast<double>(samples));
  return out;
}

RmseMatrix normalized_rmse(const RmseMatrix& m) {
  const std::size_t datasets = m.empty() ? 0 : m.front().size();
  for (const auto& row : m) {
    if (row.size() != datasets) throw ShapeError("RMSE matrix rows differ in length");
  }
  RmseMatrix out(m.size(), std::vector<std::optional<double>>(datasets));
  for (std::size_t d = 0; d < datasets; ++d) {
    double best = std::numeric_limits<double>::infinity();
    bool any = false;
    for (const auto& row : m) {
      if (!row[d]) continue;
      if (*row[d] < 0.0 || !std::isfinite(*row[d])) throw ValidationError("RMSE values must be finite and ≥ 0");
      best = std::min(best, *row[d]);
      any = true;
    }
    if (!any) continue;
    if (best < kNrmseEpsilon) throw DegenerateColumnError(d);
    for (std::size_t x = 0; x < m.size(); ++x) {
      if (m[x][d]) out[x][d] = *m[x][d] / best;
    }
  }
  return out;
}

std::vector<std::optional<double>> avg_nrmse(const RmseMatrix& m) {
  const auto nm = normalized_rmse(m);
  std::vector<std::optional<double>> out(nm.size());
  for (std::size_t x = 0; x < nm.size(); ++x) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& v : nm[x]) {
      if (!v) continue;
      sum += *v;
      ++count;
    }
    if (count) out[x] = sum / static_cast<double>(count);
  }
  return out;
}

std::vector<std::optional<double>> wst_nrmse(const RmseMatrix& m) {
  const auto nm = normalized_rmse(m);
  std::vector<std::optional<double>> out(nm.size());
  for (std::size_t x = 0; x < nm.size(); ++x) {
    for (const auto& v : nm[x]) {
      if (v) out[x] = out[x] ? std::max(*out[x], *v) : *v;
    }
  }
  return out;
}

}  // namespace stmeta::bench
