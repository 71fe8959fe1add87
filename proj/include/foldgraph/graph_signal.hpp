#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "foldgraph/dense.hpp"

namespace foldgraph {

/// side x side grid of 2D nodes over the unit square. Node r*side + c sits at
/// ((c + 0.5)/side, (r + 0.5)/side).
class Lattice2D {
 public:
  Lattice2D() = default;
  /// Throws DomainError for side == 0.
  explicit Lattice2D(std::size_t side);

  std::size_t side() const noexcept { return side_; }
  std::size_t size() const noexcept { return side_ * side_; }
  const Matrix& nodes() const noexcept { return nodes_; }

 private:
  std::size_t side_ = 0;
  Matrix nodes_;
};

/// The k lattice neighbours of node i (self excluded) ordered by distance, then index.
std::vector<std::size_t> lattice_neighbors(const Lattice2D& lat, std::size_t i, std::size_t k);

/// Row-normalized Gaussian weights over each node's k nearest lattice neighbours.
/// Throws DomainError unless 1 <= k < M and sigma > 0.
Matrix build_initial_adjacency(const Lattice2D& lat, std::size_t k, double sigma);

/// ½(I + A)·x, evaluated as (x + A·x)·0.5.
Matrix haar_filter(const Matrix& a, const Matrix& x);
/// ((1−α)I + αA)·x; α = 0.5 is exactly haar_filter.
Matrix alpha_filter_adjacency(const Matrix& a, const Matrix& x, double alpha);

/// (μI + 𝓛)⁻¹·x through a Cholesky solve. Throws DomainError for mu <= 0.
Matrix laplacian_filter(const Matrix& a, const Matrix& x, double mu);
/// V diag((μ + λᵢ)^(−2α)) Vᵀ·x from the eigendecomposition of 𝓛.
Matrix alpha_filter_laplacian(const Matrix& a, const Matrix& x, double mu, double alpha);

struct LaplacianSpectrum {
  std::vector<double> eigenvalues;  // ascending
  Matrix eigenvectors;              // column i pairs with eigenvalues[i]
};

/// Cyclic Jacobi. Stops when the off-diagonal Frobenius norm drops below
/// 1e-12·‖m‖_F; NumericalError after 100 sweeps. Each eigenvector is signed so
/// its entries sum to a nonnegative value.
LaplacianSpectrum eig_symmetric(const Matrix& m);

/// ‖m − VΣVᵀ‖_F / ‖m‖_F (0 for the zero matrix).
double reconstruction_residual(const Matrix& m, const LaplacianSpectrum& spec);
/// max |VᵀV − I|.
double orthogonality_defect(const LaplacianSpectrum& spec);

/// |λ_max| by power iteration from a fixed start vector.
double spectral_radius(const Matrix& a);

/// ‖x − A·x/|λ_max|‖²; ‖x‖² when the spectral radius is 0.
double graph_tv(const Matrix& a, std::span<const double> x);
double graph_tv(const Matrix& a, std::span<const double> x, double radius);

/// xᵀ·lap·x.
double quadratic_variation(const Matrix& lap, std::span<const double> x);

/// Throws DomainError unless every entry of `grid` is 0 or 1.
void validate_lattice_signal(const Matrix& grid);
/// Directional total variation at cell (i, j), 0-based; cells outside the grid read as 0.
double dtv_at(const Matrix& grid, std::ptrdiff_t i, std::ptrdiff_t j);
double dtv(const Matrix& grid);

/// True iff grid(⌈x1ₗ⌉, ⌈x2ₗ⌉) = 1 (1-based) for every ℓ and the grid holds exactly
/// x1.size() ones. Coordinates that fall outside the grid make the result false.
bool equivalence_check(const Matrix& grid, std::span<const double> x1, std::span<const double> x2);

/// One eigenvalue per line.
void write_spectrum(const std::filesystem::path& path, const std::vector<double>& eigenvalues);

}  // namespace foldgraph
