#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "foldgraph/errors.hpp"
#include "foldgraph/graph_signal.hpp"
#include "foldgraph/theory.hpp"
#include "op_cases.hpp"

using namespace foldgraph;
using foldgraph::testing::random_matrix;

namespace {

Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
  return e;
}

Matrix random_adjacency(std::size_t n, Rng& rng) {
  Matrix a = random_matrix(n, n, rng, 0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) a(i, i) = 0.0;
  return a;
}

}  // namespace

TEST_CASE("lattice nodes sit at cell centres in row-major order") {
  const Lattice2D lat(3);
  CHECK(lat.size() == 9);
  CHECK(lat.nodes()(5, 0) == doctest::Approx(2.5 / 3));
  CHECK(lat.nodes()(5, 1) == doctest::Approx(1.5 / 3));
  CHECK_THROWS_AS(Lattice2D(0), DomainError);
}

TEST_CASE("lattice neighbours agree with a brute-force distance sort") {
  const Lattice2D lat(6);
  for (std::size_t i : {0u, 7u, 20u, 35u}) {
    std::vector<std::size_t> idx;
    for (std::size_t j = 0; j < lat.size(); ++j)
      if (j != i) idx.push_back(j);
    auto d2 = [&](std::size_t j) {
      const double dx = lat.nodes()(i, 0) - lat.nodes()(j, 0), dy = lat.nodes()(i, 1) - lat.nodes()(j, 1);
      return std::round((dx * dx + dy * dy) * 36.0);
    };
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return d2(a) < d2(b); });
    idx.resize(8);
    CHECK(lattice_neighbors(lat, i, 8) == idx);
  }
}

TEST_CASE("initial adjacency is row-stochastic over exactly k lattice neighbours") {
  const Lattice2D lat(5);
  const Matrix a = build_initial_adjacency(lat, 4, 0.1);
  for (std::size_t i = 0; i < lat.size(); ++i) {
    double s = 0.0;
    std::size_t nz = 0;
    for (std::size_t j = 0; j < lat.size(); ++j) {
      s += a(i, j);
      nz += a(i, j) > 0.0 ? 1 : 0;
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(nz == 4);
    CHECK(a(i, i) == 0.0);
    for (std::size_t j : lattice_neighbors(lat, i, 4)) CHECK(a(i, j) > 0.0);
  }
  CHECK_THROWS_AS(build_initial_adjacency(lat, 0, 0.1), DomainError);
  CHECK_THROWS_AS(build_initial_adjacency(lat, 25, 0.1), DomainError);
  CHECK_THROWS_AS(build_initial_adjacency(lat, 3, 0.0), DomainError);
}

TEST_CASE("Jacobi eigendecomposition agrees with Eigen") {
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 2 + rng.below(20);
    const Matrix lap = laplacian_matrix(random_adjacency(n, rng));
    const LaplacianSpectrum spec = eig_symmetric(lap);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(to_eigen(lap));
    for (std::size_t i = 0; i < n; ++i) CHECK(spec.eigenvalues[i] == doctest::Approx(ref.eigenvalues()(i)).epsilon(1e-10).scale(1.0));
    CHECK(reconstruction_residual(lap, spec) < 1e-12);
    CHECK(orthogonality_defect(spec) < 1e-12);
    CHECK(std::abs(spec.eigenvalues[0]) < 1e-10);
    CHECK(std::is_sorted(spec.eigenvalues.begin(), spec.eigenvalues.end()));
    double col_sum = 0.0;
    for (std::size_t r = 0; r < n; ++r) col_sum += spec.eigenvectors(r, 0);
    CHECK(col_sum >= 0.0);
  }
  CHECK_THROWS_AS(eig_symmetric(Matrix{{1, 2}, {0, 1}}), DomainError);
}

TEST_CASE("Laplacian filter solves (muI + L) y = x") {
  Rng rng(4);
  const Matrix a = random_adjacency(12, rng);
  const Matrix x = random_matrix(12, 3, rng);
  const Matrix y = laplacian_filter(a, x, 0.5);
  const Eigen::MatrixXd sys = to_eigen(laplacian_matrix(a)) + 0.5 * Eigen::MatrixXd::Identity(12, 12);
  const Eigen::MatrixXd ref = sys.ldlt().solve(to_eigen(x));
  CHECK((to_eigen(y) - ref).norm() < 1e-12);
  CHECK_THROWS_AS(laplacian_filter(a, x, 0.0), DomainError);
  // The spectral form at alpha = 1/2 is the same operator.
  CHECK(frobenius_norm(add(alpha_filter_laplacian(a, x, 0.5, 0.5), scaled(y, -1.0))) < 1e-10);
  CHECK(frobenius_norm(add(alpha_filter_laplacian(a, x, 0.5, 0.0), scaled(x, -1.0))) < 1e-10);
}

TEST_CASE("Haar filter averages a signal with its one-hop shift") {
  Rng rng(8);
  const Matrix a = random_adjacency(6, rng);
  const Matrix x = random_matrix(6, 2, rng);
  const Matrix h = haar_filter(a, x);
  const Matrix ax = matmul(a, x);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 2; ++j) CHECK(h(i, j) == (x(i, j) + ax(i, j)) * 0.5);
  CHECK(alpha_filter_adjacency(a, x, 0.5) == h);
  CHECK(alpha_filter_adjacency(a, x, 0.0) == x);
}

TEST_CASE("spectral radius and graph total variation") {
  Rng rng(10);
  const Matrix a = random_adjacency(9, rng);
  Eigen::EigenSolver<Eigen::MatrixXd> es(to_eigen(a));
  double rho = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) rho = std::max(rho, std::abs(es.eigenvalues()(i)));
  CHECK(spectral_radius(a) == doctest::Approx(rho).epsilon(1e-9));
  CHECK(spectral_radius(Matrix(3, 3)) == 0.0);
  const std::vector<double> x{1, 2, 3};
  CHECK(graph_tv(Matrix(3, 3), x) == 14.0);

  // A row-stochastic graph leaves constants untouched.
  Matrix p(4, 4, 0.25);
  const std::vector<double> ones(4, 1.0);
  CHECK(graph_tv(p, ones) == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("the Z example: printed graph gives zero variation, the lattice does not") {
  const ZShapeExample z = z_shape_example();
  CHECK(graph_tv(z.adjacency, z.x1) < 1e-20);
  CHECK(graph_tv(z.adjacency, z.x2) < 1e-20);
  CHECK(equivalence_check(z.grid, z.x1, z.x2));
  CHECK(dtv(z.grid) > 0.0);
  for (std::size_t r = 0; r < 8; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < 8; ++c) s += z.adjacency(r, c);
    CHECK(s == 1.0);
  }
  std::vector<double> moved = z.x1;
  moved[0] = 2.0;
  CHECK_FALSE(equivalence_check(z.grid, moved, z.x2));
  CHECK_FALSE(equivalence_check(z.grid, std::vector<double>{9.0}, std::vector<double>{1.0}));
}

TEST_CASE("DTV is zero for constant grids and rejects non-binary entries") {
  CHECK(dtv(Matrix(4, 4, 0.0)) == 0.0);
  CHECK_THROWS_AS(validate_lattice_signal(Matrix{{0, 0.5}}), DomainError);
  Matrix single(3, 3, 0.0);
  single(1, 1) = 1.0;
  CHECK(dtv_at(single, 1, 1) > 0.0);
}

TEST_CASE("Laplacian is symmetric PSD with the constant null vector") {
  Rng rng(12);
  const Matrix lap = laplacian_matrix(random_adjacency(10, rng));
  CHECK(symmetry_defect(lap) == 0.0);
  for (std::size_t i = 0; i < 10; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 10; ++j) s += lap(i, j);
    CHECK(std::abs(s) < 1e-14);
  }
  for (int t = 0; t < 5; ++t) {
    std::vector<double> x(10);
    for (double& v : x) v = rng.normal();
    CHECK(quadratic_variation(lap, x) >= -1e-12);
  }
}
