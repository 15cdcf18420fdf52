#include "stmeta/numerics/optim.hpp"

#include <cmath>
#include <random>

#include "stmeta/errors.hpp"

namespace stmeta::numerics {

void adam_step(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state) {
  if (params.size() != grads.size()) throw ShapeError("adam_step: parameter and gradient counts differ");
  if (state.first_moment.empty() && state.step_count == 0) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.size(), 0.0);
      state.second_moment.emplace_back(p.size(), 0.0);
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw ShapeError("adam_step: optimizer state tracks a different parameter list");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params[i].shape() || state.first_moment[i].size() != params[i].size()) {
      throw ShapeError("adam_step: shape mismatch for parameter " + std::to_string(i) + " " +
                       to_string(params[i].shape()) + " vs gradient " + to_string(grads[i].shape()));
    }
  }

  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    auto g = grads[i].values();
    std::vector<double> updated = params[i].storage();
    for (std::size_t j = 0; j < updated.size(); ++j) {
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      updated[j] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
    params[i] = params[i].with_values(std::move(updated));
  }
}

double clip_by_global_norm(std::span<Tensor> grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) {
    for (double v : g.values()) sq += v * v;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double k = max_norm / norm;
    for (auto& g : grads) {
      std::vector<double> scaled = g.storage();
      for (auto& v : scaled) v *= k;
      g = Tensor(g.shape(), std::move(scaled));
    }
  }
  return norm;
}

double glorot_bound(const Shape& shape) {
  if (shape.empty()) throw ShapeError("glorot_init: empty shape");
  double fan_in = static_cast<double>(shape.front());
  double fan_out = static_cast<double>(shape.back());
  if (shape.size() >= 2) {
    fan_in = static_cast<double>(shape[shape.size() - 2]);
    fan_out = static_cast<double>(shape[shape.size() - 1]);
  }
  return std::sqrt(6.0 / (fan_in + fan_out));
}

Tensor glorot_init(const Shape& shape, std::uint64_t seed) {
  const double bound = glorot_bound(shape);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(element_count(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor::parameter(shape, std::move(v));
}

}  // namespace stmeta::numerics
