#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace stmeta::numerics {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string to_string(const Shape& shape);

class Tape;

/// Dense row-major tensor of doubles.
///
/// Values are immutable and shared between copies, so tensors behave as
/// cheap value types. A tensor produced by an operation while a Tape is
/// active carries a node handle into that tape; parameters are leaves with
/// a stable identity (leaf_id) that survives optimizer updates.
class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros(Shape shape);
  static Tensor filled(Shape shape, double value);
  static Tensor scalar(double value);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor identity(std::size_t n);

  /// Trainable leaf. Each call mints a new identity.
  static Tensor parameter(Shape shape, std::vector<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return values_->size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> values() const noexcept { return *values_; }
  const std::vector<double>& storage() const noexcept { return *values_; }
  const std::shared_ptr<const std::vector<double>>& shared_storage() const noexcept { return values_; }
  double operator[](std::size_t flat) const { return (*values_)[flat]; }
  double at(std::size_t row, std::size_t col) const;
  double item() const;

  bool requires_grad() const noexcept { return requires_grad_; }
  std::uint64_t leaf_id() const noexcept { return leaf_id_; }
  bool is_leaf() const noexcept { return leaf_id_ != 0; }

  /// Constant view of the same values, detached from any tape.
  Tensor detach() const;
  /// Same leaf identity with replaced values (used by optimizers).
  Tensor with_values(std::vector<double> values) const;
  Tensor reshaped(Shape shape) const;

 private:
  friend class Tape;

  Shape shape_;
  std::shared_ptr<const std::vector<double>> values_;
  bool requires_grad_ = false;
  std::uint64_t leaf_id_ = 0;
  std::int64_t node_ = -1;
  const Tape* tape_ = nullptr;
  std::uint64_t tape_epoch_ = 0;
};

/// Leaf gradients produced by Tape::backward, keyed by leaf identity.
class Gradients {
 public:
  void accumulate(std::uint64_t leaf_id, const Shape& shape, std::span<const double> grad);
  /// Gradient of `param`; zeros when the loss did not depend on it.
  Tensor of(const Tensor& param) const;
  bool contains(const Tensor& param) const { return grads_.count(param.leaf_id()) != 0; }
  std::size_t size() const noexcept { return grads_.size(); }

 private:
  std::map<std::uint64_t, Tensor> grads_;
};

/// Reverse-mode recording of tensor operations.
///
/// A tape is confined to the thread that activated it (see TapeScope).
/// Operations record a node only when at least one input is tracked.
class Tape {
 public:
  /// Accumulates the node's output gradient into each input's gradient
  /// buffer. Buffers for untracked inputs are null.
  using BackwardFn =
      std::function<void(std::span<const double> grad_out, std::span<std::vector<double>* const> grad_in)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active() noexcept;

  /// Runs the backward pass from a scalar loss, then resets the tape.
  Gradients backward(const Tensor& loss);
  void reset();

  std::size_t node_count() const noexcept { return nodes_.size(); }

  /// Node handle of a tensor on this tape, registering tracked leaves on
  /// first use. Returns -1 for constants.
  std::int64_t node_of(const Tensor& t);
  Tensor record(Shape shape, std::vector<double> values, std::vector<std::int64_t> inputs, BackwardFn fn);

 private:
  struct Node {
    std::vector<std::int64_t> inputs;
    BackwardFn backward;
    std::size_t size = 0;
    std::uint64_t leaf_id = 0;
    Shape shape;
  };

  std::vector<Node> nodes_;
  std::map<std::uint64_t, std::int64_t> leaf_nodes_;
  std::uint64_t epoch_ = 1;

  friend class TapeScope;
};

/// Makes a tape the active recording tape for the current thread.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

namespace detail {
/// Returns the active tape if any of `inputs` is tracked on it, else null.
Tape* tracking_tape(std::initializer_list<const Tensor*> inputs);
Tape* tracking_tape(std::span<const Tensor> inputs);
}  // namespace detail

}  // namespace stmeta::numerics
