#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "stmeta/numerics/tensor.hpp"

// Differentiable tensor operations. Every operation records a tape node
// when a tape is active and at least one input is tracked; otherwise it is
// a plain value computation. Binary elementwise operations require equal
// shapes, except that either operand may be a single-element scalar.

namespace stmeta::numerics {

inline constexpr double kDefaultLeakySlope = 0.2;

Tensor matmul(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);

Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double slope = kDefaultLeakySlope);

enum class ElementwiseOp { add, sub, mul, sigmoid, tanh, leaky_relu };

/// Dispatcher over the elementwise family. Unary kinds use `args[0]` only.
Tensor elementwise(ElementwiseOp op, std::span<const Tensor> args, double leaky_slope = kDefaultLeakySlope);

/// Row-wise softmax of a matrix, computed with max subtraction.
Tensor softmax_rows(const Tensor& x);

Tensor concat(std::span<const Tensor> tensors, std::size_t axis);
Tensor concat(std::initializer_list<Tensor> tensors, std::size_t axis);

/// Contiguous sub-range [begin, begin + count) along `axis`.
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t count);

/// Mean along `axis`; the reduced axis is kept with size 1.
Tensor reduce_mean(const Tensor& x, std::size_t axis);
Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);

/// x[m×n] + bias[1×n] added to every row.
Tensor add_row_vector(const Tensor& x, const Tensor& bias);
/// x[m×n] with row i multiplied by s[i] (s is m×1).
Tensor scale_rows(const Tensor& x, const Tensor& s);

/// Applies a constant n×n operator to every consecutive block of n rows of
/// x[(B·n)×F]: out[b·n+i] = Σ_j op[i][j]·x[b·n+j]. Gradient flows to x only.
Tensor block_left_multiply(const Tensor& op, const Tensor& x);

Tensor mse_loss(const Tensor& prediction, const Tensor& target);

}  // namespace stmeta::numerics
