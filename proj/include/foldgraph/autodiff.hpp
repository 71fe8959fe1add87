#pragma once

// Minimal reverse-mode differentiation over dense 64-bit tensors of rank 1 or 2.
//
// A Tensor is a shared handle to a value buffer and a lazily allocated gradient
// buffer. Leaves (model parameters, inputs) are created directly; every other
// tensor is produced by a Tape, which records one node per operation in
// execution order. Tape::backward replays the nodes in reverse, so each node is
// visited exactly once and every operand is finished before it is consumed.
//
// Tapes are single-use and single-threaded: build one per forward pass.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "foldgraph/dense.hpp"

namespace foldgraph::ad {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

class Tensor {
 public:
  Tensor() = default;

  /// Leaf tensor; `values` must hold shape_size(shape) entries (zeros when empty).
  static Tensor leaf(Shape shape, std::vector<double> values = {});
  static Tensor leaf(const Matrix& m);

  bool defined() const noexcept { return static_cast<bool>(impl_); }
  bool is_leaf() const noexcept { return impl_->leaf; }

  const Shape& shape() const noexcept { return impl_->shape; }
  std::size_t rank() const noexcept { return impl_->shape.size(); }
  std::size_t size() const noexcept { return impl_->values.size(); }
  /// Rank-2 extents; a rank-1 tensor reads as a single row.
  std::size_t rows() const noexcept;
  std::size_t cols() const noexcept;

  std::span<double> values() noexcept { return impl_->values; }
  std::span<const double> values() const noexcept { return impl_->values; }
  double value(std::size_t i) const noexcept { return impl_->values[i]; }
  double item() const;

  bool has_grad() const noexcept { return !impl_->grad.empty() || impl_->values.empty(); }
  /// Gradient buffer, allocated (zero-filled) on first access. The handle is
  /// shared, so a const handle still exposes the writable buffer.
  std::span<double> grad() const;
  void zero_grad() const;

  Matrix to_matrix() const;

  /// Identity of the underlying storage.
  const void* id() const noexcept { return impl_.get(); }

 private:
  struct Impl {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;
    bool leaf = true;
  };
  explicit Tensor(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}

  std::shared_ptr<Impl> impl_;
  friend class Tape;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  /// Standard matrix product; DimensionError names both shapes on mismatch.
  Tensor matmul(const Tensor& a, const Tensor& b);
  Tensor transpose(const Tensor& a);
  Tensor reshape(const Tensor& a, Shape shape);

  Tensor add(const Tensor& a, const Tensor& b);
  Tensor sub(const Tensor& a, const Tensor& b);
  Tensor mul(const Tensor& a, const Tensor& b);
  Tensor scale(const Tensor& a, double s);
  /// a[m x n] + bias broadcast over rows; bias has n entries.
  Tensor add_row_vector(const Tensor& a, const Tensor& bias);
  /// Repeats a single row (rank 1 or 1 x n) m times.
  Tensor broadcast_rows(const Tensor& row, std::size_t m);
  /// a + s·I for square a.
  Tensor add_identity(const Tensor& a, double s);

  /// Elementwise max(0, x); the subgradient at 0 is 0.
  Tensor relu(const Tensor& a);
  /// Row-wise softmax with per-row max subtraction.
  Tensor softmax_rows(const Tensor& a);
  /// Columnwise maximum of an N x C tensor, shape {C}; ties route to the lowest row.
  Tensor maxpool_over_points(const Tensor& a);
  Tensor concat_cols(const Tensor& a, const Tensor& b);
  /// Y with a·Y = b for symmetric positive definite a (only its lower triangle is read).
  /// The gradient w.r.t. a is symmetrized.
  Tensor spd_solve(const Tensor& a, const Tensor& b);
  /// D̃ − Ã with Ã = (A + Aᵀ)/2, D̃ = diag(Ã·1).
  Tensor laplacian(const Tensor& a);
  /// (A + Aᵀ)/2.
  Tensor symmetrize(const Tensor& a);

  Tensor sum(const Tensor& a);

  using BackwardFn = std::function<void(const Tensor& out)>;
  /// Records an externally defined operation. `backward` reads out.grad() and
  /// accumulates into its operands' gradients.
  Tensor custom(Shape shape, std::vector<double> values, BackwardFn backward);

  /// Seeds d(loss)/d(loss) = 1 and replays the record in reverse. Intermediate
  /// gradients are reset first; leaf gradients accumulate across calls.
  void backward(const Tensor& loss);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  Tensor make(Shape shape, std::vector<double> values, BackwardFn backward);

  struct Node {
    Tensor output;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

}  // namespace foldgraph::ad
