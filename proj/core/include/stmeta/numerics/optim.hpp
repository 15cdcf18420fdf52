#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "stmeta/numerics/tensor.hpp"

namespace stmeta::numerics {

/// ADAM hyper-parameters plus per-parameter moment estimates.
struct AdamState {
  std::int64_t step_count = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  double learning_rate = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One bias-corrected ADAM update applied to every parameter in place.
/// Moments are allocated on the first call; later calls must pass the
/// same parameter list in the same order.
void adam_step(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state);

/// Rescales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_by_global_norm(std::span<Tensor> grads, double max_norm);

/// Uniform Glorot samples in ±sqrt(6 / (fan_in + fan_out)).
Tensor glorot_init(const Shape& shape, std::uint64_t seed);
double glorot_bound(const Shape& shape);

}  // namespace stmeta::numerics
