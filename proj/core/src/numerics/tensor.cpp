#include "stmeta/numerics/tensor.hpp"

#include <atomic>
#include <numeric>
#include <sstream>

#include "stmeta/errors.hpp"

namespace stmeta::numerics {

namespace {

std::atomic<std::uint64_t> next_leaf_id{1};
thread_local Tape* active_tape = nullptr;

}  // namespace

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor() : Tensor(Shape{1}, std::vector<double>{0.0}) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::make_shared<const std::vector<double>>(std::move(values))) {
  if (shape_.empty()) throw ShapeError("tensor shape must have at least one dimension");
  for (auto d : shape_) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + to_string(shape_));
  }
  if (element_count(shape_) != values_->size()) {
    throw ShapeError("shape " + to_string(shape_) + " does not match " + std::to_string(values_->size()) +
                     " values");
  }
}

Tensor Tensor::zeros(Shape shape) { return filled(std::move(shape), 0.0); }

Tensor Tensor::filled(Shape shape, double value) {
  const auto n = element_count(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{1}, {value}); }

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor(Shape{rows, cols}, std::move(values));
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> v;
  v.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("ragged rows in Tensor::from_rows");
    v.insert(v.end(), row.begin(), row.end());
  }
  return matrix(r, c, std::move(v));
}

Tensor Tensor::identity(std::size_t n) {
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  return matrix(n, n, std::move(v));
}

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  Tensor t(std::move(shape), std::move(values));
  t.requires_grad_ = true;
  t.leaf_id_ = next_leaf_id.fetch_add(1);
  return t;
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw ShapeError("expected a matrix, got shape " + to_string(shape_));
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw ShapeError("expected a matrix, got shape " + to_string(shape_));
  return shape_[1];
}

double Tensor::at(std::size_t row, std::size_t col) const { return (*values_)[row * cols() + col]; }

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() needs a single-element tensor, got " + to_string(shape_));
  return (*values_)[0];
}

Tensor Tensor::detach() const {
  Tensor t = *this;
  t.requires_grad_ = false;
  t.leaf_id_ = 0;
  t.node_ = -1;
  t.tape_ = nullptr;
  return t;
}

Tensor Tensor::with_values(std::vector<double> values) const {
  if (values.size() != size()) throw ShapeError("with_values: size mismatch for " + to_string(shape_));
  Tensor t = *this;
  t.values_ = std::make_shared<const std::vector<double>>(std::move(values));
  t.node_ = -1;
  t.tape_ = nullptr;
  return t;
}

Tensor Tensor::reshaped(Shape shape) const {
  if (element_count(shape) != size()) {
    throw ShapeError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
  }
  Tensor t = *this;
  t.shape_ = std::move(shape);
  return t;
}

void Gradients::accumulate(std::uint64_t leaf_id, const Shape& shape, std::span<const double> grad) {
  auto it = grads_.find(leaf_id);
  if (it == grads_.end()) {
    grads_.emplace(leaf_id, Tensor(shape, std::vector<double>(grad.begin(), grad.end())));
    return;
  }
  std::vector<double> sum = it->second.storage();
  for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += grad[i];
  it->second = Tensor(shape, std::move(sum));
}

Tensor Gradients::of(const Tensor& param) const {
  auto it = grads_.find(param.leaf_id());
  if (it == grads_.end()) return Tensor::zeros(param.shape());
  return it->second;
}

Tape* Tape::active() noexcept { return active_tape; }

std::int64_t Tape::node_of(const Tensor& t) {
  if (t.node_ >= 0) {
    if (t.tape_ != this || t.tape_epoch_ != epoch_) {
      throw PreconditionError("tensor belongs to another tape or to a tape that has since been reset");
    }
    return t.node_;
  }
  if (!t.requires_grad_ || t.leaf_id_ == 0) return -1;
  auto it = leaf_nodes_.find(t.leaf_id_);
  if (it != leaf_nodes_.end()) return it->second;
  const auto id = static_cast<std::int64_t>(nodes_.size());
  Node node;
  node.size = t.size();
  node.leaf_id = t.leaf_id_;
  node.shape = t.shape_;
  nodes_.push_back(std::move(node));
  leaf_nodes_.emplace(t.leaf_id_, id);
  return id;
}

Tensor Tape::record(Shape shape, std::vector<double> values, std::vector<std::int64_t> inputs, BackwardFn fn) {
  Tensor out(std::move(shape), std::move(values));
  Node node;
  node.inputs = std::move(inputs);
  node.backward = std::move(fn);
  node.size = out.size();
  node.shape = out.shape_;
  out.node_ = static_cast<std::int64_t>(nodes_.size());
  out.tape_ = this;
  out.tape_epoch_ = epoch_;
  out.requires_grad_ = true;
  nodes_.push_back(std::move(node));
  return out;
}

Gradients Tape::backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw PreconditionError("backward needs a scalar loss, got shape " + to_string(loss.shape()));
  }
  Gradients result;
  const std::int64_t root = node_of(loss);
  if (root < 0) {
    reset();
    return result;
  }
  std::vector<std::vector<double>> grads(nodes_.size());
  grads[static_cast<std::size_t>(root)].assign(1, 1.0);

  std::vector<std::vector<double>*> in_ptrs;
  for (std::int64_t id = root; id >= 0; --id) {
    auto& node = nodes_[static_cast<std::size_t>(id)];
    auto& g = grads[static_cast<std::size_t>(id)];
    if (g.empty()) continue;
    if (node.leaf_id != 0) {
      result.accumulate(node.leaf_id, node.shape, g);
      continue;
    }
    in_ptrs.assign(node.inputs.size(), nullptr);
    for (std::size_t i = 0; i < node.inputs.size(); ++i) {
      const auto in = node.inputs[i];
      if (in < 0) continue;
      auto& buf = grads[static_cast<std::size_t>(in)];
      if (buf.empty()) buf.assign(nodes_[static_cast<std::size_t>(in)].size, 0.0);
      in_ptrs[i] = &buf;
    }
    node.backward(g, in_ptrs);
    // Release the buffer as soon as the node is processed.
    std::vector<double>().swap(g);
  }
  reset();
  return result;
}

void Tape::reset() {
  nodes_.clear();
  leaf_nodes_.clear();
  ++epoch_;
}

TapeScope::TapeScope(Tape& tape) : previous_(active_tape) { active_tape = &tape; }

TapeScope::~TapeScope() { active_tape = previous_; }

namespace detail {

Tape* tracking_tape(std::initializer_list<const Tensor*> inputs) {
  Tape* tape = Tape::active();
  if (!tape) return nullptr;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return tape;
  }
  return nullptr;
}

Tape* tracking_tape(std::span<const Tensor> inputs) {
  Tape* tape = Tape::active();
  if (!tape) return nullptr;
  for (const Tensor& t : inputs) {
    if (t.requires_grad()) return tape;
  }
  return nullptr;
}

}  // namespace detail

}  // namespace stmeta::numerics
