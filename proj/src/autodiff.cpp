#include "foldgraph/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "foldgraph/errors.hpp"
#include "foldgraph/kernels.hpp"

namespace foldgraph::ad {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

namespace {

void require_rank(const Tensor& t, const char* op) {
  if (t.rank() < 1 || t.rank() > 2) {
    throw DimensionError(std::string(op) + ": expected rank 1 or 2, got " + shape_string(t.shape()));
  }
}

// Row-major transpose of a rows x cols buffer.
std::vector<double> transposed(std::span<const double> src, std::size_t rows, std::size_t cols) {
  std::vector<double> t(src.size());
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) t[j * rows + i] = src[i * cols + j];
  return t;
}

}  // namespace

// ---- Tensor -------------------------------------------------------------------------------------

Tensor Tensor::leaf(Shape shape, std::vector<double> values) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one extent");
  const std::size_t n = shape_size(shape);
  if (values.empty()) values.assign(n, 0.0);
  if (values.size() != n) {
    throw DimensionError("tensor " + shape_string(shape) + " given " +
                         std::to_string(values.size()) + " values");
  }
  auto impl = std::make_shared<Impl>();
  impl->shape = std::move(shape);
  impl->values = std::move(values);
  return Tensor(std::move(impl));
}

Tensor Tensor::leaf(const Matrix& m) { return leaf({m.rows(), m.cols()}, m.values()); }

std::size_t Tensor::rows() const noexcept { return rank() == 1 ? 1 : impl_->shape[0]; }
std::size_t Tensor::cols() const noexcept {
  return rank() == 1 ? impl_->shape[0] : impl_->shape[1];
}

double Tensor::item() const {
  if (size() != 1) throw DomainError("item() on tensor of shape " + shape_string(shape()));
  return impl_->values[0];
}

std::span<double> Tensor::grad() const {
  if (impl_->grad.size() != impl_->values.size()) impl_->grad.assign(impl_->values.size(), 0.0);
  return impl_->grad;
}

void Tensor::zero_grad() const { impl_->grad.assign(impl_->values.size(), 0.0); }

Matrix Tensor::to_matrix() const { return Matrix(rows(), cols(), impl_->values); }

// ---- Tape ---------------------------------------------------------------------------------------

Tensor Tape::make(Shape shape, std::vector<double> values, BackwardFn backward) {
  Tensor out = Tensor::leaf(std::move(shape), std::move(values));
  out.impl_->leaf = false;
  nodes_.push_back(Node{out, std::move(backward)});
  return out;
}

Tensor Tape::custom(Shape shape, std::vector<double> values, BackwardFn backward) {
  return make(std::move(shape), std::move(values), std::move(backward));
}

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, "matmul");
  require_rank(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (k != b.rows()) {
    throw DimensionError("matmul: inner dimensions differ, " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  kernels::gemm_acc(m, k, n, a.values().data(), b.values().data(), out.data());
  return make({m, n}, std::move(out), [a, b, m, k, n](const Tensor& o) mutable {
    const auto g = o.grad();
    // dA += G·Bᵀ, dB += Aᵀ·G, each as a plain row-major product.
    const auto bt = transposed(b.values(), k, n);
    kernels::gemm_acc(m, n, k, g.data(), bt.data(), a.grad().data());
    const auto at = transposed(a.values(), m, k);
    kernels::gemm_acc(k, m, n, at.data(), g.data(), b.grad().data());
  });
}

Tensor Tape::transpose(const Tensor& a) {
  require_rank(a, "transpose");
  const std::size_t m = a.rows(), n = a.cols();
  return make({n, m}, transposed(a.values(), m, n), [a, m, n](const Tensor& o) mutable {
    const auto g = o.grad();
    auto ga = a.grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
  });
}

Tensor Tape::reshape(const Tensor& a, Shape shape) {
  if (shape_size(shape) != a.size()) {
    throw DimensionError("reshape: " + shape_string(a.shape()) + " to " + shape_string(shape));
  }
  std::vector<double> v(a.values().begin(), a.values().end());
  return make(std::move(shape), std::move(v), [a](const Tensor& o) mutable {
    kernels::axpy(o.size(), 1.0, o.grad().data(), a.grad().data());
  });
}

namespace {
void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes differ, " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}
}  // namespace

Tensor Tape::add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> v(a.values().begin(), a.values().end());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] += b.value(i);
  return make(a.shape(), std::move(v), [a, b](const Tensor& o) mutable {
    kernels::axpy(o.size(), 1.0, o.grad().data(), a.grad().data());
    kernels::axpy(o.size(), 1.0, o.grad().data(), b.grad().data());
  });
}

Tensor Tape::sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> v(a.values().begin(), a.values().end());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] -= b.value(i);
  return make(a.shape(), std::move(v), [a, b](const Tensor& o) mutable {
    kernels::axpy(o.size(), 1.0, o.grad().data(), a.grad().data());
    kernels::axpy(o.size(), -1.0, o.grad().data(), b.grad().data());
  });
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.value(i) * b.value(i);
  return make(a.shape(), std::move(v), [a, b](const Tensor& o) mutable {
    const auto g = o.grad();
    auto ga = a.grad();
    auto gb = b.grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i] * b.value(i);
      gb[i] += g[i] * a.value(i);
    }
  });
}

Tensor Tape::scale(const Tensor& a, double s) {
  std::vector<double> v(a.values().begin(), a.values().end());
  for (double& x : v) x *= s;
  return make(a.shape(), std::move(v), [a, s](const Tensor& o) mutable {
    kernels::axpy(o.size(), s, o.grad().data(), a.grad().data());
  });
}

Tensor Tape::add_row_vector(const Tensor& a, const Tensor& bias) {
  require_rank(a, "add_row_vector");
  const std::size_t m = a.rows(), n = a.cols();
  if (bias.size() != n) {
    throw DimensionError("add_row_vector: " + shape_string(a.shape()) + " with bias " +
                         shape_string(bias.shape()));
  }
  std::vector<double> v(a.values().begin(), a.values().end());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) v[i * n + j] += bias.value(j);
  return make(a.shape(), std::move(v), [a, bias, m, n](const Tensor& o) mutable {
    const auto g = o.grad();
    kernels::axpy(g.size(), 1.0, g.data(), a.grad().data());
    auto gb = bias.grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
  });
}

Tensor Tape::broadcast_rows(const Tensor& row, std::size_t m) {
  if (row.rows() != 1) {
    throw DimensionError("broadcast_rows: expected a single row, got " + shape_string(row.shape()));
  }
  const std::size_t n = row.size();
  std::vector<double> v(m * n);
  for (std::size_t i = 0; i < m; ++i) std::copy(row.values().begin(), row.values().end(), v.begin() + i * n);
  return make({m, n}, std::move(v), [row, m, n](const Tensor& o) mutable {
    const auto g = o.grad();
    auto gr = row.grad();
    for (std::size_t i = 0; i < m; ++i) kernels::axpy(n, 1.0, g.data() + i * n, gr.data());
  });
}

Tensor Tape::add_identity(const Tensor& a, double s) {
  if (a.rank() != 2 || a.rows() != a.cols()) {
    throw DimensionError("add_identity: expected a square matrix, got " + shape_string(a.shape()));
  }
  const std::size_t n = a.rows();
  std::vector<double> v(a.values().begin(), a.values().end());
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] += s;
  return make(a.shape(), std::move(v), [a](const Tensor& o) mutable {
    kernels::axpy(o.size(), 1.0, o.grad().data(), a.grad().data());
  });
}

Tensor Tape::relu(const Tensor& a) {
  std::vector<double> v(a.size());
  kernels::relu(v.size(), a.values().data(), v.data());
  return make(a.shape(), std::move(v), [a](const Tensor& o) mutable {
    const auto g = o.grad();
    auto ga = a.grad();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (a.value(i) > 0.0) ga[i] += g[i];
  });
}

Tensor Tape::softmax_rows(const Tensor& a) {
  require_rank(a, "softmax_rows");
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < m; ++i) {
    const double* x = a.values().data() + i * n;
    double* y = v.data() + i * n;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, x[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      y[j] = std::exp(x[j] - mx);
      z += y[j];
    }
    for (std::size_t j = 0; j < n; ++j) y[j] /= z;
  }
  return make(a.shape(), std::move(v), [a, m, n](const Tensor& o) mutable {
    const auto g = o.grad();
    const auto y = o.values();
    auto ga = a.grad();
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += g[i * n + j] * y[i * n + j];
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += y[i * n + j] * (g[i * n + j] - dot);
    }
  });
}

Tensor Tape::maxpool_over_points(const Tensor& a) {
  require_rank(a, "maxpool_over_points");
  const std::size_t npts = a.rank() == 2 ? a.rows() : 0;
  if (a.rank() != 2 || npts == 0) {
    throw DomainError("maxpool_over_points: need at least one point, got " +
                      shape_string(a.shape()));
  }
  const std::size_t c = a.cols();
  std::vector<double> v(a.values().begin(), a.values().begin() + static_cast<std::ptrdiff_t>(c));
  std::vector<std::size_t> arg(c, 0);
  for (std::size_t i = 1; i < npts; ++i) {
    const double* row = a.values().data() + i * c;
    for (std::size_t j = 0; j < c; ++j) {
      if (row[j] > v[j]) {
        v[j] = row[j];
        arg[j] = i;
      }
    }
  }
  return make({c}, std::move(v), [a, c, arg = std::move(arg)](const Tensor& o) mutable {
    const auto g = o.grad();
    auto ga = a.grad();
    for (std::size_t j = 0; j < c; ++j) ga[arg[j] * c + j] += g[j];
  });
}

Tensor Tape::concat_cols(const Tensor& a, const Tensor& b) {
  require_rank(a, "concat_cols");
  require_rank(b, "concat_cols");
  const std::size_t m = a.rows();
  if (b.rows() != m) {
    throw DimensionError("concat_cols: row counts differ, " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()));
  }
  const std::size_t p = a.cols(), q = b.cols(), n = p + q;
  std::vector<double> v(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    std::copy_n(a.values().data() + i * p, p, v.data() + i * n);
    std::copy_n(b.values().data() + i * q, q, v.data() + i * n + p);
  }
  return make({m, n}, std::move(v), [a, b, m, p, q, n](const Tensor& o) mutable {
    const auto g = o.grad();
    auto ga = a.grad();
    auto gb = b.grad();
    for (std::size_t i = 0; i < m; ++i) {
      kernels::axpy(p, 1.0, g.data() + i * n, ga.data() + i * p);
      kernels::axpy(q, 1.0, g.data() + i * n + p, gb.data() + i * q);
    }
  });
}

Tensor Tape::spd_solve(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || a.rows() != a.cols()) {
    throw DimensionError("spd_solve: expected a square matrix, got " + shape_string(a.shape()));
  }
  require_rank(b, "spd_solve");
  const std::size_t n = a.rows();
  if (b.rows() != n) {
    throw DimensionError("spd_solve: " + shape_string(a.shape()) + " with right-hand side " +
                         shape_string(b.shape()));
  }
  const Matrix am = a.to_matrix();
  const double defect = symmetry_defect(am);
  if (defect > 1e-9 * std::max(1.0, max_abs(am))) {
    std::ostringstream os;
    os << "spd_solve: matrix is not symmetric (defect " << defect << ")";
    throw DomainError(os.str());
  }
  auto chol = std::make_shared<Cholesky>(am);
  const std::size_t k = b.cols();
  Matrix y = chol->solve(Matrix(n, k, std::vector<double>(b.values().begin(), b.values().end())));
  Shape shape = b.shape();
  return make(std::move(shape), y.values(), [a, b, chol, n, k](const Tensor& o) mutable {
    const auto g = o.grad();
    const Matrix gbar = chol->solve(Matrix(n, k, std::vector<double>(g.begin(), g.end())));
    kernels::axpy(gbar.size(), 1.0, gbar.data(), b.grad().data());
    // dA = -sym(Ḡ·Yᵀ)
    const auto yt = transposed(o.values(), n, k);
    std::vector<double> outer(n * n, 0.0);
    kernels::gemm_acc(n, k, n, gbar.data(), yt.data(), outer.data());
    auto ga = a.grad();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] -= 0.5 * (outer[i * n + j] + outer[j * n + i]);
  });
}

Tensor Tape::symmetrize(const Tensor& a) {
  if (a.rank() != 2 || a.rows() != a.cols()) {
    throw DimensionError("symmetrize: expected a square matrix, got " + shape_string(a.shape()));
  }
  const std::size_t n = a.rows();
  Matrix s = foldgraph::symmetrize(a.to_matrix());
  return make(a.shape(), s.values(), [a, n](const Tensor& o) mutable {
    const auto g = o.grad();
    auto ga = a.grad();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += 0.5 * (g[i * n + j] + g[j * n + i]);
  });
}

Tensor Tape::laplacian(const Tensor& a) {
  if (a.rank() != 2 || a.rows() != a.cols()) {
    throw DimensionError("laplacian: expected a square matrix, got " + shape_string(a.shape()));
  }
  const std::size_t n = a.rows();
  Matrix lap = laplacian_matrix(a.to_matrix());
  return make(a.shape(), lap.values(), [a, n](const Tensor& o) mutable {
    const auto g = o.grad();
    // Gradient w.r.t. the symmetrized weights S: dS_ij = dL_ii - dL_ij (i != j), dS_ii = 0.
    std::vector<double> gs(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) gs[i * n + j] = g[i * n + i] - g[i * n + j];
    auto ga = a.grad();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += 0.5 * (gs[i * n + j] + gs[j * n + i]);
  });
}

Tensor Tape::sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  return make({1}, {s}, [a](const Tensor& o) mutable {
    const double g = o.grad()[0];
    for (double& x : a.grad()) x += g;
  });
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw DomainError("backward: loss must be a scalar, got " +
                      (loss.defined() ? shape_string(loss.shape()) : std::string("undefined")));
  }
  for (auto& node : nodes_) node.output.zero_grad();
  Tensor seed = loss;
  seed.grad()[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->backward(it->output);
}

}  // namespace foldgraph::ad
