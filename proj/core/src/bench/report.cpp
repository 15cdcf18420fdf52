#include <cmath>
#include <ostream>

#include <json.hpp>

#include "stmeta/bench.hpp"
#include "util/text.hpp"

namespace stmeta::bench {

namespace {

using nlohmann::json;

constexpr int kReportVersion = 1;

bool close(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); }

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::string csv_value(const std::optional<double>& v) { return v ? util::format_double(*v) : std::string(); }

}  // namespace

void self_check(const BenchReport& report) {
  const std::size_t nd = report.datasets.size();
  const std::size_t nm = report.methods.size();
  if (report.runs.size() != nm * nd || report.rmse.size() != nm) throw Error("self-check: report shape mismatch");

  for (std::size_t k = 0; k < report.runs.size(); ++k) {
    const auto& r = report.runs[k];
    const auto& cell = report.rmse[k / nd][k % nd];
    if (r.ok != cell.has_value()) throw Error("self-check: run status disagrees with the RMSE matrix");
    if (!r.ok) continue;
    long double acc = 0.0L;
    for (std::size_t c = 0; c < r.pred.size(); ++c) {
      const long double d = static_cast<long double>(r.pred[c]) - r.truth[c];
      acc += d * d;
    }
    const double brute = static_cast<double>(std::sqrt(acc / static_cast<long double>(r.pred.size())));
    if (!close(r.rmse, brute) || *cell != r.rmse) {
      throw Error("self-check: RMSE of " + r.method + " on " + r.dataset + " does not match a direct recomputation");
    }
  }

  for (std::size_t x = 0; x < nm; ++x) {
    double sum = 0.0, worst = 0.0;
    std::size_t count = 0;
    for (std::size_t d = 0; d < nd; ++d) {
      if (!report.rmse[x][d]) continue;
      double best = 0.0;
      bool seen = false;
      for (std::size_t y = 0; y < nm; ++y) {
        if (report.rmse[y][d] && (!seen || *report.rmse[y][d] < best)) {
          best = *report.rmse[y][d];
          seen = true;
        }
      }
      const double ratio = *report.rmse[x][d] / best;
      sum += ratio;
      worst = count == 0 ? ratio : std::max(worst, ratio);
      ++count;
    }
    const auto& avg = report.avg_nrmse[x];
    const auto& wst = report.wst_nrmse[x];
    if ((count > 0) != avg.has_value() || (count > 0) != wst.has_value()) {
      throw Error("self-check: aggregate presence mismatch for " + report.methods[x]);
    }
    if (count == 0) continue;
    if (!close(*avg, sum / static_cast<double>(count)) || !close(*wst, worst)) {
      throw Error("self-check: AvgNRMSE/WstNRMSE of " + report.methods[x] + " do not match a direct recomputation");
    }
    if (!(*wst >= *avg - 1e-12 && *avg >= 1.0 - 1e-12)) throw Error("self-check: WstNRMSE ≥ AvgNRMSE ≥ 1 violated");
  }

  for (std::size_t d = 0; d < nd; ++d) {
    bool any = false, unit = false;
    for (std::size_t x = 0; x < nm; ++x) {
      if (!report.rmse[x][d]) continue;
      any = true;
      double best = *report.rmse[x][d];
      for (std::size_t y = 0; y < nm; ++y) {
        if (report.rmse[y][d]) best = std::min(best, *report.rmse[y][d]);
      }
      unit = unit || *report.rmse[x][d] / best == 1.0;
    }
    if (any && !unit) throw Error("self-check: dataset column " + report.datasets[d] + " has no normalized entry of 1");
  }
}

void write_report_csv(std::ostream& os, const BenchReport& report) {
  os << "method";
  for (const auto& d : report.datasets) os << ',' << csv_field(d);
  os << ",AvgNRMSE,WstNRMSE\n";
  for (std::size_t x = 0; x < report.methods.size(); ++x) {
    os << csv_field(report.methods[x]);
    for (const auto& v : report.rmse[x]) os << ',' << csv_value(v);
    os << ',' << csv_value(report.avg_nrmse[x]) << ',' << csv_value(report.wst_nrmse[x]) << '\n';
  }
}

void write_report_json(std::ostream& os, const BenchReport& report) {
  json j;
  j["format"] = "stmeta-report";
  j["version"] = kReportVersion;
  j["config_digest"] = report.config_digest;
  j["config"] = json::parse(report.effective_config);
  j["methods"] = report.methods;
  j["datasets"] = report.datasets;
  json matrix = json::array();
  for (const auto& row : report.rmse) {
    json r = json::array();
    for (const auto& v : row) r.push_back(optional_json(v));
    matrix.push_back(std::move(r));
  }
  j["rmse"] = std::move(matrix);
  json avg = json::object(), wst = json::object();
  for (std::size_t x = 0; x < report.methods.size(); ++x) {
    avg[report.methods[x]] = optional_json(report.avg_nrmse[x]);
    wst[report.methods[x]] = optional_json(report.wst_nrmse[x]);
  }
  j["avg_nrmse"] = std::move(avg);
  j["wst_nrmse"] = std::move(wst);
  json excluded = json::array(), runs = json::array();
  for (const auto& r : report.runs) {
    json e;
    e["method"] = r.method;
    e["dataset"] = r.dataset;
    e["status"] = r.ok ? "ok" : "error";
    e["seed"] = r.seed;
    e["config_digest"] = r.config_digest;
    if (r.ok) {
      e["rmse"] = r.rmse;
      e["rmse_per_location"] = r.rmse_per_location;
      e["test_samples"] = r.test_samples;
      e["train_seconds"] = r.train_seconds;
      e["inference_seconds"] = r.inference_seconds;
      if (r.epochs) {
        e["epochs"] = r.epochs;
        e["stop_reason"] = r.stop_reason;
      }
    } else {
      e["error"] = r.error;
      excluded.push_back({{"method", r.method}, {"dataset", r.dataset}, {"error", r.error}});
    }
    runs.push_back(std::move(e));
  }
  j["excluded"] = std::move(excluded);
  j["runs"] = std::move(runs);
  j["self_check"] = report.self_checked ? "passed" : "skipped";
  os << j.dump(2) << '\n';
}

}  // namespace stmeta::bench
