#include "stmeta/graphkit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include "stmeta/errors.hpp"
#include "stmeta/numerics/ops.hpp"
#include "util/text.hpp"

namespace stmeta::graphkit {

namespace {

std::vector<double> dense_product(const std::vector<double>& a, const std::vector<double>& b, std::size_t n) {
  std::vector<double> out(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      const double av = a[i * n + k];
      if (av == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += av * b[k * n + j];
    }
  }
  return out;
}

RelationGraph empty_graph(GraphKind kind, std::size_t n, double threshold) {
  RelationGraph g;
  g.kind = kind;
  g.n = n;
  g.adjacency.assign(n * n, 0);
  g.threshold = threshold;
  return g;
}

void link(RelationGraph& g, std::size_t i, std::size_t j) {
  g.adjacency[i * g.n + j] = 1;
  g.adjacency[j * g.n + i] = 1;
}

}  // namespace

std::string_view to_string(GraphKind kind) {
  switch (kind) {
    case GraphKind::proximity: return "proximity";
    case GraphKind::functionality: return "functionality";
    case GraphKind::interaction: return "interaction";
    case GraphKind::same_line: return "same_line";
  }
  return "proximity";
}

GraphKind parse_graph_kind(std::string_view text) {
  if (text == "proximity") return GraphKind::proximity;
  if (text == "functionality") return GraphKind::functionality;
  if (text == "interaction") return GraphKind::interaction;
  if (text == "same_line") return GraphKind::same_line;
  throw ValidationError("unknown graph kind '" + std::string(text) + "'");
}

std::string_view threshold_unit(GraphKind kind) {
  switch (kind) {
    case GraphKind::proximity: return "meters";
    case GraphKind::functionality: return "pearson_r";
    case GraphKind::interaction: return "records_per_month";
    case GraphKind::same_line: return "none";
  }
  return "none";
}

RelationGraph RelationGraph::from_adjacency(GraphKind kind, std::size_t n, std::vector<std::uint8_t> adjacency,
                                            double threshold) {
  if (adjacency.size() != n * n) throw ShapeError("adjacency size does not match n×n");
  for (std::size_t i = 0; i < n; ++i) {
    if (adjacency[i * n + i] != 0) throw ValidationError("adjacency diagonal must be zero");
    for (std::size_t j = 0; j < n; ++j) {
      if (adjacency[i * n + j] > 1) throw ValidationError("adjacency entries must be 0 or 1");
      if (adjacency[i * n + j] != adjacency[j * n + i]) throw ValidationError("adjacency must be symmetric");
    }
  }
  RelationGraph g;
  g.kind = kind;
  g.n = n;
  g.adjacency = std::move(adjacency);
  g.threshold = threshold;
  return g;
}

std::size_t RelationGraph::degree(std::size_t i) const {
  std::size_t d = 0;
  for (std::size_t j = 0; j < n; ++j) d += adjacency[i * n + j];
  return d;
}

std::size_t RelationGraph::edge_count() const {
  std::size_t e = 0;
  for (auto v : adjacency) e += v;
  return e / 2;
}

double RelationGraph::mean_degree() const {
  return n == 0 ? 0.0 : 2.0 * static_cast<double>(edge_count()) / static_cast<double>(n);
}

Tensor RelationGraph::adjacency_matrix() const {
  std::vector<double> v(adjacency.begin(), adjacency.end());
  return Tensor::matrix(n, n, std::move(v));
}

double haversine_meters(GeoPoint a, GeoPoint b) {
  constexpr double deg = std::numbers::pi / 180.0;
  const double dlat = (b.lat - a.lat) * deg;
  const double dlon = (b.lon - a.lon) * deg;
  const double h = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(a.lat * deg) * std::cos(b.lat * deg) * std::sin(dlon / 2) * std::sin(dlon / 2);
  return 2.0 * kEarthRadiusMeters * std::asin(std::min(1.0, std::sqrt(h)));
}

void validate_coordinates(std::span<const GeoPoint> coords) {
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const auto& p = coords[i];
    if (!std::isfinite(p.lat) || !std::isfinite(p.lon) || p.lat < -90 || p.lat > 90 || p.lon < -180 ||
        p.lon > 180) {
      throw ValidationError("coordinate " + std::to_string(i) + " out of range");
    }
  }
}

RelationGraph build_proximity_graph(std::span<const GeoPoint> coords, double threshold_m) {
  if (coords.size() < 2) throw PreconditionError("proximity graph needs at least 2 locations");
  validate_coordinates(coords);
  auto g = empty_graph(GraphKind::proximity, coords.size(), threshold_m);
  for (std::size_t i = 0; i < g.n; ++i) {
    for (std::size_t j = i + 1; j < g.n; ++j) {
      if (haversine_meters(coords[i], coords[j]) < threshold_m) link(g, i, j);
    }
  }
  return g;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

namespace {

std::vector<std::vector<double>> training_series(const timeseries::TrafficTensor& traffic,
                                                 timeseries::SlotRange train) {
  if (train.end > traffic.slots || train.size() < 2) {
    throw PreconditionError("functionality graph needs at least 2 training slots");
  }
  std::vector<std::vector<double>> series(traffic.locations);
  for (std::size_t i = 0; i < traffic.locations; ++i) {
    for (std::size_t s = train.begin; s < train.end; ++s) series[i].push_back(traffic.at(s, i));
  }
  return series;
}

}  // namespace

RelationGraph build_functionality_graph(const timeseries::TrafficTensor& traffic, timeseries::SlotRange train,
                                        double corr_threshold) {
  const auto series = training_series(traffic, train);
  auto g = empty_graph(GraphKind::functionality, traffic.locations, corr_threshold);
  for (std::size_t i = 0; i < g.n; ++i) {
    for (std::size_t j = i + 1; j < g.n; ++j) {
      if (pearson(series[i], series[j]) > corr_threshold) link(g, i, j);
    }
  }
  return g;
}

RelationGraph build_interaction_graph(std::span<const double> od_counts, std::size_t n,
                                      double records_per_month_threshold, double months) {
  if (months <= 0.0) throw PreconditionError("interaction graph needs a positive number of months");
  if (od_counts.size() != n * n) throw ShapeError("OD matrix size does not match n×n");
  for (double v : od_counts) {
    if (v < 0.0) throw PreconditionError("OD counts must be non-negative");
  }
  auto g = empty_graph(GraphKind::interaction, n, records_per_month_threshold);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if ((od_counts[i * n + j] + od_counts[j * n + i]) / months >= records_per_month_threshold) link(g, i, j);
    }
  }
  return g;
}

RelationGraph build_sameline_graph(std::span<const std::vector<std::string>> line_assignment) {
  const std::size_t n = line_assignment.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (line_assignment[i].empty()) {
      throw PreconditionError("location " + std::to_string(i) + " has no line assignment");
    }
  }
  auto g = empty_graph(GraphKind::same_line, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto& a = line_assignment[i];
      const auto& b = line_assignment[j];
      const bool shared = std::any_of(a.begin(), a.end(), [&](const std::string& line) {
        return std::find(b.begin(), b.end(), line) != b.end();
      });
      if (shared) link(g, i, j);
    }
  }
  return g;
}

double calibrate_threshold(std::vector<double> pair_values, std::size_t n, EdgeRule rule, double target_fraction) {
  if (pair_values.empty()) throw PreconditionError("threshold calibration needs at least one pair");
  const double wanted = target_fraction * static_cast<double>(n) * static_cast<double>(n) / 2.0;
  const std::size_t edges = std::min(pair_values.size(), static_cast<std::size_t>(std::llround(wanted)));
  if (rule == EdgeRule::below) {
    std::sort(pair_values.begin(), pair_values.end());
  } else {
    std::sort(pair_values.begin(), pair_values.end(), std::greater<>());
  }
  if (edges == 0) return pair_values.front();
  if (edges == pair_values.size()) {
    return rule == EdgeRule::below ? pair_values.back() + 1.0 : pair_values.back() - 1.0;
  }
  return 0.5 * (pair_values[edges - 1] + pair_values[edges]);
}

double calibrate_proximity_threshold(std::span<const GeoPoint> coords, double target_fraction) {
  validate_coordinates(coords);
  std::vector<double> d;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    for (std::size_t j = i + 1; j < coords.size(); ++j) d.push_back(haversine_meters(coords[i], coords[j]));
  }
  return calibrate_threshold(std::move(d), coords.size(), EdgeRule::below, target_fraction);
}

double calibrate_functionality_threshold(const timeseries::TrafficTensor& traffic, timeseries::SlotRange train,
                                         double target_fraction) {
  const auto series = training_series(traffic, train);
  std::vector<double> r;
  for (std::size_t i = 0; i < series.size(); ++i) {
    for (std::size_t j = i + 1; j < series.size(); ++j) r.push_back(pearson(series[i], series[j]));
  }
  return calibrate_threshold(std::move(r), series.size(), EdgeRule::above, target_fraction);
}

double power_iteration_lambda_max(const Tensor& symmetric, int iterations) {
  const std::size_t n = symmetric.rows();
  std::mt19937_64 rng(0x5eed);
  std::uniform_real_distribution<double> dist(0.5, 1.5);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  auto m = symmetric.values();
  auto multiply = [&](const std::vector<double>& in) {
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) out[i] += m[i * n + j] * in[j];
    }
    return out;
  };
  auto normalize = [](std::vector<double>& x) {
    double norm = 0.0;
    for (double e : x) norm += e * e;
    norm = std::sqrt(norm);
    if (norm > 0.0) {
      for (auto& e : x) e /= norm;
    }
    return norm;
  };
  normalize(v);
  for (int it = 0; it < iterations; ++it) {
    v = multiply(v);
    if (normalize(v) == 0.0) return 0.0;
  }
  const auto mv = multiply(v);
  double rayleigh = 0.0;
  for (std::size_t i = 0; i < n; ++i) rayleigh += v[i] * mv[i];
  return rayleigh;
}

LaplacianBundle normalized_laplacian(const RelationGraph& g, std::size_t cheb_order, ChebyshevMode mode) {
  const std::size_t n = g.n;
  std::vector<double> inv_sqrt_deg(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto d = g.degree(i);
    if (d > 0) inv_sqrt_deg[i] = 1.0 / std::sqrt(static_cast<double>(d));
  }
  std::vector<double> lap(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    lap[i * n + i] = 1.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (g.has_edge(i, j)) lap[i * n + j] -= inv_sqrt_deg[i] * inv_sqrt_deg[j];
    }
  }

  LaplacianBundle b;
  b.n = n;
  b.cheb_order = cheb_order;
  b.mode = mode;
  b.laplacian = Tensor::matrix(n, n, lap);
  b.lambda_max = std::clamp(power_iteration_lambda_max(b.laplacian), 1.0, 2.0);

  std::vector<double> scaled = lap;
  if (mode == ChebyshevMode::scaled) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) scaled[i * n + j] = 2.0 * lap[i * n + j] / b.lambda_max - (i == j ? 1.0 : 0.0);
    }
  }
  b.scaled = Tensor::matrix(n, n, scaled);

  std::vector<std::vector<double>> terms;
  terms.push_back(Tensor::identity(n).storage());
  if (cheb_order >= 1) terms.push_back(scaled);
  for (std::size_t k = 2; k <= cheb_order; ++k) {
    auto next = dense_product(scaled, terms[k - 1], n);
    for (std::size_t e = 0; e < n * n; ++e) next[e] = 2.0 * next[e] - terms[k - 2][e];
    terms.push_back(std::move(next));
  }
  for (auto& t : terms) b.basis.push_back(Tensor::matrix(n, n, std::move(t)));
  return b;
}

DiffusionBundle random_walk_bundle(const RelationGraph& g, std::size_t order) {
  const std::size_t n = g.n;
  std::vector<double> fwd(n * n, 0.0), rev(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t out_deg = 0, in_deg = 0;
    for (std::size_t j = 0; j < n; ++j) {
      out_deg += g.adjacency[i * n + j];
      in_deg += g.adjacency[j * n + i];
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (out_deg) fwd[i * n + j] = g.adjacency[i * n + j] / static_cast<double>(out_deg);
      if (in_deg) rev[i * n + j] = g.adjacency[j * n + i] / static_cast<double>(in_deg);
    }
  }
  DiffusionBundle b;
  b.n = n;
  b.order = order;
  b.symmetric = fwd == rev;
  std::vector<double> pf = Tensor::identity(n).storage(), pr = pf;
  b.forward.push_back(Tensor::matrix(n, n, pf));
  b.reverse.push_back(Tensor::matrix(n, n, pr));
  for (std::size_t k = 1; k <= order; ++k) {
    pf = dense_product(fwd, pf, n);
    pr = dense_product(rev, pr, n);
    b.forward.push_back(Tensor::matrix(n, n, pf));
    b.reverse.push_back(Tensor::matrix(n, n, pr));
  }
  return b;
}

Tensor graph_conv(const Tensor& x, std::span<const Tensor> theta, const LaplacianBundle& bundle) {
  if (theta.size() != bundle.basis.size()) {
    throw ShapeError("graph_conv: " + std::to_string(theta.size()) + " weight matrices for Chebyshev order " +
                     std::to_string(bundle.cheb_order));
  }
  if (x.rank() != 2 || x.rows() % bundle.n != 0) {
    throw ShapeError("graph_conv: input " + numerics::to_string(x.shape()) + " does not fit a graph of " +
                     std::to_string(bundle.n) + " nodes");
  }
  Tensor out = numerics::matmul(x, theta[0]);
  for (std::size_t k = 1; k < theta.size(); ++k) {
    out = numerics::add(out, numerics::matmul(numerics::block_left_multiply(bundle.basis[k], x), theta[k]));
  }
  return out;
}

void write_graph(std::ostream& os, const RelationGraph& g) {
  os << g.n << ' ' << to_string(g.kind) << ' ' << util::format_double(g.threshold) << '\n';
  for (std::size_t i = 0; i < g.n; ++i) {
    for (std::size_t j = i + 1; j < g.n; ++j) {
      if (g.has_edge(i, j)) os << i << ' ' << j << '\n';
    }
  }
}

RelationGraph read_graph(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw IngestError("graph file is empty");
  std::istringstream header(line);
  std::size_t n = 0;
  std::string kind, threshold;
  if (!(header >> n >> kind >> threshold) || n == 0) throw IngestError("graph header must be 'n kind threshold'");
  auto thr = util::parse_double(threshold);
  if (!thr) throw IngestError("graph header has a bad threshold '" + threshold + "'");
  auto g = empty_graph(parse_graph_kind(kind), n, *thr);
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (util::trim(line).empty()) continue;
    std::istringstream edge(line);
    std::size_t i = 0, j = 0;
    if (!(edge >> i >> j) || i >= n || j >= n || i == j) {
      throw IngestError("graph line " + std::to_string(line_no) + ": invalid edge '" + line + "'");
    }
    link(g, i, j);
  }
  return g;
}

void save_graph(const std::string& path, const RelationGraph& g) {
  std::ofstream os(path);
  if (!os) throw IngestError("cannot write " + path);
  write_graph(os, g);
}

RelationGraph load_graph(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IngestError("cannot read " + path);
  return read_graph(is);
}

}  // namespace stmeta::graphkit
