#pragma once

// Eigen-based oracles for Laplacian and Chebyshev checks. Chebyshev terms are
// computed through the eigendecomposition (T_k(λ) = cos(k·acos λ)), which is
// independent of the three-term recurrence used by the library.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>

#include "stmeta/graphkit.hpp"

namespace stmeta::testing {

inline Eigen::MatrixXd to_eigen(const numerics::Tensor& t) {
  Eigen::MatrixXd m(t.rows(), t.cols());
  for (std::size_t i = 0; i < t.rows(); ++i) {
    for (std::size_t j = 0; j < t.cols(); ++j) m(i, j) = t.at(i, j);
  }
  return m;
}

inline Eigen::VectorXd eigenvalues(const numerics::Tensor& symmetric) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(to_eigen(symmetric));
  return solver.eigenvalues();
}

inline double chebyshev_scalar(std::size_t k, double x) {
  if (std::abs(x) <= 1.0) return std::cos(static_cast<double>(k) * std::acos(x));
  const double s = (x > 0 || k % 2 == 0) ? 1.0 : -1.0;
  return s * std::cosh(static_cast<double>(k) * std::acosh(std::abs(x)));
}

inline Eigen::MatrixXd chebyshev_by_eigendecomposition(const numerics::Tensor& symmetric, std::size_t k) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(to_eigen(symmetric));
  Eigen::VectorXd d = solver.eigenvalues().unaryExpr([k](double x) { return chebyshev_scalar(k, x); });
  return solver.eigenvectors() * d.asDiagonal() * solver.eigenvectors().transpose();
}

inline graphkit::RelationGraph random_graph(std::size_t n, double density, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(density);
  std::vector<std::uint8_t> adj(n * n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (coin(rng)) adj[i * n + j] = adj[j * n + i] = 1;
    }
  }
  return graphkit::RelationGraph::from_adjacency(graphkit::GraphKind::functionality, n, std::move(adj), 0.0);
}

}  // namespace stmeta::testing
