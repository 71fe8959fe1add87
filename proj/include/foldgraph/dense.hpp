#pragma once

// Row-major dense matrices and the handful of factorizations the library needs.

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace foldgraph {

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  const std::vector<double>& values() const noexcept { return data_; }
  std::vector<double>& values() noexcept { return data_; }

  std::string shape_string() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Matrix add(const Matrix& a, const Matrix& b);
Matrix scaled(const Matrix& a, double s);
Matrix column(const Matrix& a, std::size_t c);

double frobenius_norm(const Matrix& a);
double max_abs(const Matrix& a);
/// max |a(i,j) - a(j,i)|; throws DimensionError for non-square input.
double symmetry_defect(const Matrix& a);

/// (A + Aᵀ)/2 entrywise as 0.5 * (a_ij + a_ji).
Matrix symmetrize(const Matrix& a);

/// D̃ − Ã with Ã = (A + Aᵀ)/2 and D̃ = diag(Ã·1); row sums accumulate in column order.
Matrix laplacian_matrix(const Matrix& a);

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
/// Only the lower triangle of the input is read.
class Cholesky {
 public:
  /// Throws NumericalError naming the failing pivot when the matrix is not SPD.
  explicit Cholesky(const Matrix& a);

  std::size_t dim() const noexcept { return factor_.rows(); }
  const Matrix& factor() const noexcept { return factor_; }

  /// Solves A·Y = B for every column of B.
  Matrix solve(const Matrix& b) const;

 private:
  Matrix factor_;
};

}  // namespace foldgraph
