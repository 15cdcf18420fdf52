#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stmeta/numerics/tensor.hpp"
#include "stmeta/timeseries.hpp"

namespace stmeta::graphkit {

using numerics::Tensor;

enum class GraphKind { proximity, functionality, interaction, same_line };

std::string_view to_string(GraphKind kind);
GraphKind parse_graph_kind(std::string_view text);
/// Unit of the threshold that built a graph of this kind.
std::string_view threshold_unit(GraphKind kind);

/// Undirected, unweighted inter-location graph.
struct RelationGraph {
  GraphKind kind = GraphKind::proximity;
  std::size_t n = 0;
  std::vector<std::uint8_t> adjacency;  // n×n, symmetric, zero diagonal
  double threshold = 0.0;

  /// Validates symmetry, zero diagonal and 0/1 entries.
  static RelationGraph from_adjacency(GraphKind kind, std::size_t n, std::vector<std::uint8_t> adjacency,
                                      double threshold);

  bool has_edge(std::size_t i, std::size_t j) const { return adjacency[i * n + j] != 0; }
  std::size_t degree(std::size_t i) const;
  std::size_t edge_count() const;
  double mean_degree() const;
  Tensor adjacency_matrix() const;
};

struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;
};

inline constexpr double kEarthRadiusMeters = 6'371'000.0;

double haversine_meters(GeoPoint a, GeoPoint b);
void validate_coordinates(std::span<const GeoPoint> coords);

/// Edge iff great-circle distance < threshold_m.
RelationGraph build_proximity_graph(std::span<const GeoPoint> coords, double threshold_m);

/// Edge iff Pearson r of the two locations' series over `train` > threshold.
/// Zero-variance series correlate 0 with everything.
RelationGraph build_functionality_graph(const timeseries::TrafficTensor& traffic, timeseries::SlotRange train,
                                        double corr_threshold);
double pearson(std::span<const double> a, std::span<const double> b);

/// Edge iff (od[i][j] + od[j][i]) / months ≥ threshold.
RelationGraph build_interaction_graph(std::span<const double> od_counts, std::size_t n,
                                      double records_per_month_threshold, double months);

/// Edge iff the two locations share a line id.
RelationGraph build_sameline_graph(std::span<const std::vector<std::string>> line_assignment);

enum class EdgeRule {
  below,     // value < threshold
  above,     // value > threshold
  at_least,  // value ≥ threshold
};

/// Picks a threshold whose graph has mean degree ≈ target_fraction·n from
/// the pairwise values (one per unordered pair, i<j order irrelevant).
double calibrate_threshold(std::vector<double> pair_values, std::size_t n, EdgeRule rule,
                           double target_fraction = 0.25);
double calibrate_proximity_threshold(std::span<const GeoPoint> coords, double target_fraction = 0.25);
double calibrate_functionality_threshold(const timeseries::TrafficTensor& traffic, timeseries::SlotRange train,
                                         double target_fraction = 0.25);

enum class ChebyshevMode {
  scaled,  // T_k(2L/λ_max - I)
  raw,     // T_k(L)
};

/// Normalized Laplacian with its Chebyshev polynomial basis.
struct LaplacianBundle {
  std::size_t n = 0;
  Tensor laplacian;
  Tensor scaled;
  double lambda_max = 1.0;
  std::size_t cheb_order = 0;
  ChebyshevMode mode = ChebyshevMode::scaled;
  std::vector<Tensor> basis;  // cheb_order + 1 matrices
};

/// Largest eigenvalue estimate of a symmetric matrix by power iteration.
double power_iteration_lambda_max(const Tensor& symmetric, int iterations = 50);

/// L = I - D^{-1/2} A D^{-1/2}; isolated nodes get an identity row.
/// λ_max is clamped to [1, 2].
LaplacianBundle normalized_laplacian(const RelationGraph& g, std::size_t cheb_order,
                                     ChebyshevMode mode = ChebyshevMode::scaled);

/// Random-walk transition powers used by diffusion convolution.
struct DiffusionBundle {
  std::size_t n = 0;
  std::size_t order = 0;
  std::vector<Tensor> forward;  // (D_out^{-1} A)^k, k = 0..order
  std::vector<Tensor> reverse;  // (D_in^{-1} A^T)^k
  bool symmetric = true;
};

DiffusionBundle random_walk_bundle(const RelationGraph& g, std::size_t order);

/// Σ_k basis[k]·x·theta[k]. `x` may stack several samples as consecutive
/// blocks of n rows.
Tensor graph_conv(const Tensor& x, std::span<const Tensor> theta, const LaplacianBundle& bundle);

/// Plain-text adjacency list: header `n kind threshold`, then `i j` per edge
/// with i < j (0-based).
void write_graph(std::ostream& os, const RelationGraph& g);
RelationGraph read_graph(std::istream& is);
void save_graph(const std::string& path, const RelationGraph& g);
RelationGraph load_graph(const std::string& path);

}  // namespace stmeta::graphkit
