#include "foldgraph/dense.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "foldgraph/errors.hpp"
#include "foldgraph/kernels.hpp"

namespace foldgraph {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
  if (data_.size() != rows * cols) {
    throw DimensionError("matrix " + shape_string() + " given " + std::to_string(data_.size()) +
                         " values");
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw DimensionError("ragged matrix literal");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

std::string Matrix::shape_string() const {
  std::ostringstream os;
  os << '[' << rows_ << 'x' << cols_ << ']';
  return os.str();
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions differ, " + a.shape_string() + " x " +
                         b.shape_string());
  }
  Matrix c(a.rows(), b.cols());
  kernels::gemm_acc(a.rows(), a.cols(), b.cols(), a.data(), b.data(), c.data());
  return c;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

Matrix add(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError("add: " + a.shape_string() + " vs " + b.shape_string());
  }
  Matrix c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] += b.data()[i];
  return c;
}

Matrix scaled(const Matrix& a, double s) {
  Matrix c = a;
  for (double& v : c.values()) v *= s;
  return c;
}

Matrix column(const Matrix& a, std::size_t c) {
  Matrix out(a.rows(), 1);
  for (std::size_t i = 0; i < a.rows(); ++i) out(i, 0) = a(i, c);
  return out;
}

double frobenius_norm(const Matrix& a) {
  double s = 0.0;
  for (double v : a.values()) s += v * v;
  return std::sqrt(s);
}

double max_abs(const Matrix& a) {
  double m = 0.0;
  for (double v : a.values()) m = std::max(m, std::abs(v));
  return m;
}

double symmetry_defect(const Matrix& a) {
  if (a.rows() != a.cols()) throw DimensionError("expected a square matrix, got " + a.shape_string());
  double d = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = i + 1; j < a.cols(); ++j) d = std::max(d, std::abs(a(i, j) - a(j, i)));
  return d;
}

Matrix symmetrize(const Matrix& a) {
  if (a.rows() != a.cols()) throw DimensionError("symmetrize: not square " + a.shape_string());
  Matrix s(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) s(i, j) = 0.5 * (a(i, j) + a(j, i));
  return s;
}

Matrix laplacian_matrix(const Matrix& a) {
  Matrix sym = symmetrize(a);
  const std::size_t n = sym.rows();
  Matrix lap(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double degree = 0.0;
    for (std::size_t j = 0; j < n; ++j) degree += sym(i, j);
    for (std::size_t j = 0; j < n; ++j) lap(i, j) = -sym(i, j);
    lap(i, i) = degree - sym(i, i);
  }
  return lap;
}

Cholesky::Cholesky(const Matrix& a) : factor_(a.rows(), a.cols()) {
  if (a.rows() != a.cols()) throw DimensionError("cholesky: not square " + a.shape_string());
  const std::size_t n = a.rows();
  Matrix& l = factor_;
  for (std::size_t j = 0; j < n; ++j) {
    double diag = a(j, j);
    for (std::size_t p = 0; p < j; ++p) diag -= l(j, p) * l(j, p);
    if (!(diag > 0.0) || !std::isfinite(diag)) {
      std::ostringstream os;
      os << "cholesky: matrix is not positive definite, pivot " << j << " = " << diag;
      throw NumericalError(os.str());
    }
    const double ljj = std::sqrt(diag);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      const double* li = l.data() + i * n;
      const double* lj = l.data() + j * n;
      for (std::size_t p = 0; p < j; ++p) s -= li[p] * lj[p];
      l(i, j) = s / ljj;
    }
  }
}

Matrix Cholesky::solve(const Matrix& b) const {
  const std::size_t n = dim();
  if (b.rows() != n) {
    throw DimensionError("cholesky solve: rhs " + b.shape_string() + " for system of order " +
                         std::to_string(n));
  }
  const std::size_t k = b.cols();
  Matrix y = b;
  // Forward substitution L·Z = B, row by row so each step is an axpy over k columns.
  for (std::size_t i = 0; i < n; ++i) {
    double* yi = y.data() + i * k;
    for (std::size_t p = 0; p < i; ++p) kernels::axpy(k, -factor_(i, p), y.data() + p * k, yi);
    const double lii = factor_(i, i);
    for (std::size_t c = 0; c < k; ++c) yi[c] /= lii;
  }
  // Back substitution Lᵀ·Y = Z.
  for (std::size_t ii = n; ii-- > 0;) {
    double* yi = y.data() + ii * k;
    for (std::size_t p = ii + 1; p < n; ++p) kernels::axpy(k, -factor_(p, ii), y.data() + p * k, yi);
    const double lii = factor_(ii, ii);
    for (std::size_t c = 0; c < k; ++c) yi[c] /= lii;
  }
  return y;
}

}  // namespace foldgraph
