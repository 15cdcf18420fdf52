#include "stmeta/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "stmeta/errors.hpp"

namespace stmeta::numerics {

namespace {

using Buffers = std::span<std::vector<double>* const>;

std::string shapes_message(const char* op, const Tensor& a, const Tensor& b) {
  return std::string(op) + ": incompatible shapes " + to_string(a.shape()) + " and " + to_string(b.shape());
}

void require_matrix(const char* op, const Tensor& x) {
  if (x.rank() != 2) throw ShapeError(std::string(op) + ": expected a matrix, got " + to_string(x.shape()));
}

// C[m×n] += A[m×k]·B[k×n]
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m×k] += G[m×n]·B[k×n]^T
void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const double* g, const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* grow = g + i * n;
    double* crow = c + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = b + p * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
      crow[p] += acc;
    }
  }
}

// C[k×n] += A[m×k]^T·G[m×n]
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* g, double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    const double* grow = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      double* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * grow[j];
    }
  }
}

enum class BinaryKind { add, sub, mul };

Tensor binary(BinaryKind kind, const Tensor& a, const Tensor& b) {
  const char* name = kind == BinaryKind::add ? "add" : kind == BinaryKind::sub ? "sub" : "mul";
  const bool a_scalar = a.size() == 1 && b.size() != 1;
  const bool b_scalar = b.size() == 1 && a.size() != 1;
  if (!a_scalar && !b_scalar && a.shape() != b.shape()) throw ShapeError(shapes_message(name, a, b));

  const Shape& shape = a_scalar ? b.shape() : a.shape();
  const std::size_t n = element_count(shape);
  auto av = a.values();
  auto bv = b.values();
  auto ai = [&](std::size_t i) { return a_scalar ? av[0] : av[i]; };
  auto bi = [&](std::size_t i) { return b_scalar ? bv[0] : bv[i]; };

  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    switch (kind) {
      case BinaryKind::add: out[i] = ai(i) + bi(i); break;
      case BinaryKind::sub: out[i] = ai(i) - bi(i); break;
      case BinaryKind::mul: out[i] = ai(i) * bi(i); break;
    }
  }
  Tape* tape = detail::tracking_tape({&a, &b});
  if (!tape) return Tensor(shape, std::move(out));

  std::shared_ptr<const std::vector<double>> a_keep, b_keep;
  if (kind == BinaryKind::mul) {
    a_keep = a.shared_storage();
    b_keep = b.shared_storage();
  }
  return tape->record(shape, std::move(out), {tape->node_of(a), tape->node_of(b)},
                      [kind, a_scalar, b_scalar, a_keep, b_keep](std::span<const double> g, Buffers in) {
                        const std::size_t n = g.size();
                        for (int side = 0; side < 2; ++side) {
                          auto* buf = in[static_cast<std::size_t>(side)];
                          if (!buf) continue;
                          const bool scalar = side == 0 ? a_scalar : b_scalar;
                          const double sign = (kind == BinaryKind::sub && side == 1) ? -1.0 : 1.0;
                          const std::vector<double>* other = side == 0 ? b_keep.get() : a_keep.get();
                          const bool other_scalar = side == 0 ? b_scalar : a_scalar;
                          for (std::size_t i = 0; i < n; ++i) {
                            double d = sign * g[i];
                            if (kind == BinaryKind::mul) d *= other_scalar ? (*other)[0] : (*other)[i];
                            (*buf)[scalar ? 0 : i] += d;
                          }
                        }
                      });
}

template <class Forward, class Derivative>
Tensor unary(const Tensor& x, Forward f, Derivative df) {
  std::vector<double> out(x.size());
  auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xv[i]);
  Tape* tape = detail::tracking_tape({&x});
  if (!tape) return Tensor(x.shape(), std::move(out));
  auto saved_x = x.shared_storage();
  auto saved_y = std::make_shared<const std::vector<double>>(out);
  return tape->record(x.shape(), std::move(out), {tape->node_of(x)},
                      [saved_x, saved_y, df](std::span<const double> g, Buffers in) {
                        auto& buf = *in[0];
                        for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i] * df((*saved_x)[i], (*saved_y)[i]);
                      });
}

double stable_sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

struct AxisView {
  std::size_t outer = 1, axis = 1, inner = 1;
};

AxisView axis_view(const Shape& shape, std::size_t axis) {
  AxisView v;
  for (std::size_t d = 0; d < axis; ++d) v.outer *= shape[d];
  v.axis = shape[axis];
  for (std::size_t d = axis + 1; d < shape.size(); ++d) v.inner *= shape[d];
  return v;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix("matmul", a);
  require_matrix("matmul", b);
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) throw ShapeError(shapes_message("matmul", a, b));
  std::vector<double> out(m * n, 0.0);
  gemm_nn(m, k, n, a.values().data(), b.values().data(), out.data());

  Tape* tape = detail::tracking_tape({&a, &b});
  if (!tape) return Tensor::matrix(m, n, std::move(out));
  auto a_keep = a.shared_storage();
  auto b_keep = b.shared_storage();
  return tape->record(Shape{m, n}, std::move(out), {tape->node_of(a), tape->node_of(b)},
                      [m, k, n, a_keep, b_keep](std::span<const double> g, Buffers in) {
                        if (in[0]) gemm_nt(m, k, n, g.data(), b_keep->data(), in[0]->data());
                        if (in[1]) gemm_tn(m, k, n, a_keep->data(), g.data(), in[1]->data());
                      });
}

Tensor add(const Tensor& a, const Tensor& b) { return binary(BinaryKind::add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(BinaryKind::sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(BinaryKind::mul, a, b); }

Tensor scale(const Tensor& x, double factor) {
  return unary(
      x, [factor](double v) { return factor * v; }, [factor](double, double) { return factor; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(x, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor leaky_relu(const Tensor& x, double slope) {
  return unary(
      x, [slope](double v) { return v >= 0.0 ? v : slope * v; },
      [slope](double v, double) { return v >= 0.0 ? 1.0 : slope; });
}

Tensor elementwise(ElementwiseOp op, std::span<const Tensor> args, double leaky_slope) {
  const bool binary_op = op == ElementwiseOp::add || op == ElementwiseOp::sub || op == ElementwiseOp::mul;
  if (args.size() != (binary_op ? 2u : 1u)) {
    throw PreconditionError("elementwise: wrong number of arguments");
  }
  switch (op) {
    case ElementwiseOp::add: return add(args[0], args[1]);
    case ElementwiseOp::sub: return sub(args[0], args[1]);
    case ElementwiseOp::mul: return mul(args[0], args[1]);
    case ElementwiseOp::sigmoid: return sigmoid(args[0]);
    case ElementwiseOp::tanh: return tanh(args[0]);
    case ElementwiseOp::leaky_relu: return leaky_relu(args[0], leaky_slope);
  }
  throw PreconditionError("elementwise: unknown op");
}

Tensor softmax_rows(const Tensor& x) {
  require_matrix("softmax_rows", x);
  const std::size_t m = x.rows(), n = x.cols();
  auto xv = x.values();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = xv.data() + i * n;
    double* orow = out.data() + i * n;
    const double mx = *std::max_element(row, row + n);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      orow[j] = std::exp(row[j] - mx);
      total += orow[j];
    }
    for (std::size_t j = 0; j < n; ++j) orow[j] /= total;
  }
  Tape* tape = detail::tracking_tape({&x});
  if (!tape) return Tensor::matrix(m, n, std::move(out));
  auto y = std::make_shared<const std::vector<double>>(out);
  return tape->record(Shape{m, n}, std::move(out), {tape->node_of(x)},
                      [m, n, y](std::span<const double> g, Buffers in) {
                        auto& buf = *in[0];
                        for (std::size_t i = 0; i < m; ++i) {
                          double dot = 0.0;
                          for (std::size_t j = 0; j < n; ++j) dot += g[i * n + j] * (*y)[i * n + j];
                          for (std::size_t j = 0; j < n; ++j) {
                            buf[i * n + j] += (*y)[i * n + j] * (g[i * n + j] - dot);
                          }
                        }
                      });
}

Tensor concat(std::span<const Tensor> tensors, std::size_t axis) {
  if (tensors.empty()) throw PreconditionError("concat: no tensors");
  const Shape& first = tensors[0].shape();
  if (axis >= first.size()) throw ShapeError("concat: axis out of range for " + to_string(first));
  if (tensors.size() == 1) return tensors[0];

  Shape shape = first;
  shape[axis] = 0;
  for (const auto& t : tensors) {
    if (t.rank() != first.size()) throw ShapeError(shapes_message("concat", tensors[0], t));
    for (std::size_t d = 0; d < first.size(); ++d) {
      if (d != axis && t.shape()[d] != first[d]) throw ShapeError(shapes_message("concat", tensors[0], t));
    }
    shape[axis] += t.shape()[axis];
  }
  const AxisView view = axis_view(shape, axis);
  std::vector<std::size_t> widths;
  widths.reserve(tensors.size());
  for (const auto& t : tensors) widths.push_back(t.shape()[axis] * view.inner);
  const std::size_t row_width = view.axis * view.inner;

  std::vector<double> out(element_count(shape));
  std::size_t offset = 0;
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    auto src = tensors[t].values();
    for (std::size_t o = 0; o < view.outer; ++o) {
      std::copy_n(src.data() + o * widths[t], widths[t], out.data() + o * row_width + offset);
    }
    offset += widths[t];
  }

  Tape* tape = detail::tracking_tape(tensors);
  if (!tape) return Tensor(shape, std::move(out));
  std::vector<std::int64_t> inputs;
  inputs.reserve(tensors.size());
  for (const auto& t : tensors) inputs.push_back(tape->node_of(t));
  return tape->record(shape, std::move(out), std::move(inputs),
                      [widths, row_width, outer = view.outer](std::span<const double> g, Buffers in) {
                        std::size_t offset = 0;
                        for (std::size_t t = 0; t < widths.size(); ++t) {
                          if (auto* buf = in[t]) {
                            for (std::size_t o = 0; o < outer; ++o) {
                              const double* src = g.data() + o * row_width + offset;
                              double* dst = buf->data() + o * widths[t];
                              for (std::size_t j = 0; j < widths[t]; ++j) dst[j] += src[j];
                            }
                          }
                          offset += widths[t];
                        }
                      });
}

Tensor concat(std::initializer_list<Tensor> tensors, std::size_t axis) {
  return concat(std::span<const Tensor>(tensors.begin(), tensors.size()), axis);
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t count) {
  if (axis >= x.rank()) throw ShapeError("slice: axis out of range for " + to_string(x.shape()));
  if (count == 0 || begin + count > x.shape()[axis]) {
    throw ShapeError("slice: range [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                     ") out of bounds for " + to_string(x.shape()));
  }
  const AxisView view = axis_view(x.shape(), axis);
  Shape shape = x.shape();
  shape[axis] = count;
  const std::size_t src_width = view.axis * view.inner;
  const std::size_t width = count * view.inner;
  const std::size_t start = begin * view.inner;
  auto xv = x.values();
  std::vector<double> out(view.outer * width);
  for (std::size_t o = 0; o < view.outer; ++o) {
    std::copy_n(xv.data() + o * src_width + start, width, out.data() + o * width);
  }
  Tape* tape = detail::tracking_tape({&x});
  if (!tape) return Tensor(shape, std::move(out));
  return tape->record(shape, std::move(out), {tape->node_of(x)},
                      [outer = view.outer, src_width, width, start](std::span<const double> g, Buffers in) {
                        auto& buf = *in[0];
                        for (std::size_t o = 0; o < outer; ++o) {
                          for (std::size_t j = 0; j < width; ++j) buf[o * src_width + start + j] += g[o * width + j];
                        }
                      });
}

Tensor reduce_mean(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) {
    throw PreconditionError("reduce_mean: axis " + std::to_string(axis) + " invalid for " + to_string(x.shape()));
  }
  const AxisView view = axis_view(x.shape(), axis);
  Shape shape = x.shape();
  shape[axis] = 1;
  auto xv = x.values();
  std::vector<double> out(view.outer * view.inner, 0.0);
  const double inv = 1.0 / static_cast<double>(view.axis);
  for (std::size_t o = 0; o < view.outer; ++o) {
    for (std::size_t a = 0; a < view.axis; ++a) {
      const double* src = xv.data() + (o * view.axis + a) * view.inner;
      double* dst = out.data() + o * view.inner;
      for (std::size_t i = 0; i < view.inner; ++i) dst[i] += src[i];
    }
  }
  for (auto& v : out) v *= inv;
  Tape* tape = detail::tracking_tape({&x});
  if (!tape) return Tensor(shape, std::move(out));
  return tape->record(shape, std::move(out), {tape->node_of(x)},
                      [view, inv](std::span<const double> g, Buffers in) {
                        auto& buf = *in[0];
                        for (std::size_t o = 0; o < view.outer; ++o) {
                          for (std::size_t a = 0; a < view.axis; ++a) {
                            double* dst = buf.data() + (o * view.axis + a) * view.inner;
                            const double* src = g.data() + o * view.inner;
                            for (std::size_t i = 0; i < view.inner; ++i) dst[i] += src[i] * inv;
                          }
                        }
                      });
}

Tensor sum_all(const Tensor& x) {
  double total = 0.0;
  for (double v : x.values()) total += v;
  Tape* tape = detail::tracking_tape({&x});
  if (!tape) return Tensor::scalar(total);
  return tape->record(Shape{1}, {total}, {tape->node_of(x)}, [](std::span<const double> g, Buffers in) {
    for (auto& v : *in[0]) v += g[0];
  });
}

Tensor mean_all(const Tensor& x) { return scale(sum_all(x), 1.0 / static_cast<double>(x.size())); }

Tensor add_row_vector(const Tensor& x, const Tensor& bias) {
  require_matrix("add_row_vector", x);
  const std::size_t m = x.rows(), n = x.cols();
  if (bias.size() != n) throw ShapeError(shapes_message("add_row_vector", x, bias));
  auto xv = x.values();
  auto bv = bias.values();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xv[i * n + j] + bv[j];
  }
  Tape* tape = detail::tracking_tape({&x, &bias});
  if (!tape) return Tensor::matrix(m, n, std::move(out));
  return tape->record(Shape{m, n}, std::move(out), {tape->node_of(x), tape->node_of(bias)},
                      [m, n](std::span<const double> g, Buffers in) {
                        if (in[0]) {
                          for (std::size_t i = 0; i < m * n; ++i) (*in[0])[i] += g[i];
                        }
                        if (in[1]) {
                          for (std::size_t i = 0; i < m; ++i) {
                            for (std::size_t j = 0; j < n; ++j) (*in[1])[j] += g[i * n + j];
                          }
                        }
                      });
}

Tensor scale_rows(const Tensor& x, const Tensor& s) {
  require_matrix("scale_rows", x);
  const std::size_t m = x.rows(), n = x.cols();
  if (s.size() != m) throw ShapeError(shapes_message("scale_rows", x, s));
  auto xv = x.values();
  auto sv = s.values();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xv[i * n + j] * sv[i];
  }
  Tape* tape = detail::tracking_tape({&x, &s});
  if (!tape) return Tensor::matrix(m, n, std::move(out));
  auto x_keep = x.shared_storage();
  auto s_keep = s.shared_storage();
  return tape->record(Shape{m, n}, std::move(out), {tape->node_of(x), tape->node_of(s)},
                      [m, n, x_keep, s_keep](std::span<const double> g, Buffers in) {
                        for (std::size_t i = 0; i < m; ++i) {
                          double acc = 0.0;
                          for (std::size_t j = 0; j < n; ++j) {
                            if (in[0]) (*in[0])[i * n + j] += g[i * n + j] * (*s_keep)[i];
                            acc += g[i * n + j] * (*x_keep)[i * n + j];
                          }
                          if (in[1]) (*in[1])[i] += acc;
                        }
                      });
}

Tensor block_left_multiply(const Tensor& op, const Tensor& x) {
  require_matrix("block_left_multiply", op);
  require_matrix("block_left_multiply", x);
  const std::size_t n = op.rows();
  if (op.cols() != n || x.rows() % n != 0) throw ShapeError(shapes_message("block_left_multiply", op, x));
  const std::size_t blocks = x.rows() / n;
  const std::size_t f = x.cols();
  std::vector<double> out(x.size(), 0.0);
  const double* o = op.values().data();
  const double* xv = x.values().data();
  for (std::size_t b = 0; b < blocks; ++b) {
    gemm_nn(n, n, f, o, xv + b * n * f, out.data() + b * n * f);
  }
  Tape* tape = detail::tracking_tape({&x});
  if (!tape) return Tensor(x.shape(), std::move(out));
  auto op_keep = op.shared_storage();
  return tape->record(x.shape(), std::move(out), {tape->node_of(x)},
                      [n, f, blocks, op_keep](std::span<const double> g, Buffers in) {
                        for (std::size_t b = 0; b < blocks; ++b) {
                          gemm_tn(n, n, f, op_keep->data(), g.data() + b * n * f, in[0]->data() + b * n * f);
                        }
                      });
}

Tensor mse_loss(const Tensor& prediction, const Tensor& target) {
  if (prediction.shape() != target.shape()) throw ShapeError(shapes_message("mse_loss", prediction, target));
  const std::size_t n = prediction.size();
  auto pv = prediction.values();
  auto tv = target.values();
  std::vector<double> diff(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    diff[i] = pv[i] - tv[i];
    total += diff[i] * diff[i];
  }
  const double loss = total / static_cast<double>(n);
  Tape* tape = detail::tracking_tape({&prediction, &target});
  if (!tape) return Tensor::scalar(loss);
  auto d = std::make_shared<const std::vector<double>>(std::move(diff));
  return tape->record(Shape{1}, {loss}, {tape->node_of(prediction), tape->node_of(target)},
                      [d, n](std::span<const double> g, Buffers in) {
                        const double k = 2.0 * g[0] / static_cast<double>(n);
                        for (std::size_t i = 0; i < n; ++i) {
                          if (in[0]) (*in[0])[i] += k * (*d)[i];
                          if (in[1]) (*in[1])[i] -= k * (*d)[i];
                        }
                      });
}

}  // namespace stmeta::numerics
