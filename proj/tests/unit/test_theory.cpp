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

PointCloud cloud_of(std::initializer_list<std::initializer_list<double>> pts) { return PointCloud(Matrix(pts)); }

std::vector<double> mat_vec(const Matrix& a, const std::vector<double>& x) {
  std::vector<double> y(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) y[i] += a(i, j) * x[j];
  return y;
}

}  // namespace

TEST_CASE("voxel indices round trip") {
  for (std::size_t f = 0; f < 64; ++f) {
    const auto t = voxel_triple(4, f);
    CHECK(voxel_index(4, t[0], t[1], t[2]) == f);
  }
  CHECK(voxel_index(3, 1, 2, 0) == 15);
}

TEST_CASE("voxel codec places proxies at occupied centres") {
  const PointCloud s = cloud_of({{0.1, 0.1, 0.1}, {1.0, 1.0, 1.0}});
  const VoxelCode code = voxel_encode(s, 2);
  CHECK(code.code_len() == 8);
  CHECK(code.occupancy[0] == 1);
  CHECK(code.occupancy[7] == 1);
  CHECK(std::accumulate(code.occupancy.begin(), code.occupancy.end(), 0) == 2);
  const PointCloud d = voxel_decode(code);
  CHECK(d.points() == Matrix{{0.25, 0.25, 0.25}, {0.75, 0.75, 0.75}});
  CHECK(voxel_decode(code, ProxyMode::corner).points() == Matrix{{0.5, 0.5, 0.5}, {1.0, 1.0, 1.0}});
  CHECK_THROWS_AS(voxel_encode(cloud_of({{0.5, 1.5, 0.5}}), 2), DomainError);
}

TEST_CASE("first reconstruction bound holds with centre proxies") {
  Rng rng(1);
  for (std::size_t k = 1; k <= 4; ++k) {
    for (int t = 0; t < 5; ++t) {
      const Certificate c = certify_thm1(PointCloud(random_matrix(50, 3, rng, 0.0, 1.0)), k);
      CHECK(c.pass);
      CHECK(c.code_len == k * k * k);
      CHECK(c.bound == doctest::Approx(thm1_bound(static_cast<double>(k * k * k))));
    }
  }
  // A point at the origin is √3 from the corner proxy (1, 1, 1).
  const Certificate bad = certify_thm1(cloud_of({{0.0, 0.0, 0.0}}), 1, ProxyMode::corner);
  CHECK_FALSE(bad.pass);
  CHECK(bad.format().rfind("theorem 1 K 1 C 1 distance ", 0) == 0);
  CHECK(bad.format().find("FAIL") != std::string::npos);
}

TEST_CASE("second bound: smooth occupancy, interpolation and the 1/K certificate") {
  // Full 4³ cube: every voxel occupied.
  Matrix pts(64, 3);
  for (std::size_t f = 0; f < 64; ++f) {
    const auto t = voxel_triple(4, f);
    for (int a = 0; a < 3; ++a) pts(f, a) = (static_cast<double>(t[a]) + 0.5) / 4.0;
  }
  const VoxelCode full = voxel_encode(PointCloud(pts), 4);
  CHECK_FALSE(find_smoothness_violation(full).has_value());
  const VoxelCode strided = stride_encode(full);
  CHECK(strided.code_len() == 32);
  // Forward offsets cannot reach the odd far corner (3, 3, 3); every other voxel comes back.
  auto expect = full.occupancy;
  expect[voxel_index(4, 3, 3, 3)] = 0;
  CHECK(stride_interpolate(strided).occupancy == expect);
  const Certificate c = certify_thm2(PointCloud(pts), 4);
  CHECK(c.pass);
  CHECK(c.code_len == 32);
  CHECK(thm2_bound(32.0) == doctest::Approx(0.25));
  CHECK(thm2_bound(32.0) < thm1_bound(32.0));
}

TEST_CASE("an isolated-voxel pattern is rejected as non-smooth") {
  // Occupied iff all three 1-based indices are odd: each occupied voxel has only empty forward neighbours.
  std::vector<std::array<double, 3>> pts;
  for (std::size_t i = 0; i < 4; i += 2)
    for (std::size_t j = 0; j < 4; j += 2)
      for (std::size_t k = 0; k < 4; k += 2) pts.push_back({(i + 0.5) / 4, (j + 0.5) / 4, (k + 0.5) / 4});
  Matrix m(pts.size(), 3);
  for (std::size_t r = 0; r < pts.size(); ++r)
    for (int a = 0; a < 3; ++a) m(r, a) = pts[r][a];
  const VoxelCode code = voxel_encode(PointCloud(m), 4);
  const auto v = find_smoothness_violation(code);
  REQUIRE(v.has_value());
  CHECK(*v == std::array<std::size_t, 3>{0, 0, 0});
  CHECK_THROWS_AS(certify_thm2(PointCloud(m), 4), PreconditionError);
}

TEST_CASE("zero-variation solver returns a non-identity graph fixing both signals") {
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    const std::size_t m = 3 + rng.below(20);
    std::vector<double> x1(m), x2(m);
    for (double& v : x1) v = rng.normal();
    for (double& v : x2) v = rng.normal();
    const Matrix a = solve_zero_tv(x1, x2);
    const auto y1 = mat_vec(a, x1), y2 = mat_vec(a, x2);
    for (std::size_t i = 0; i < m; ++i) {
      CHECK(std::abs(y1[i] - x1[i]) < 1e-10);
      CHECK(std::abs(y2[i] - x2[i]) < 1e-10);
    }
    CHECK(frobenius_norm(add(a, scaled(Matrix::identity(m), -1.0))) > 1e-8);
    // The stacked minimum-norm rows form an orthogonal projector.
    CHECK(frobenius_norm(add(matmul(a, a), scaled(a, -1.0))) < 1e-10);
    CHECK(symmetry_defect(a) < 1e-12);
  }
  CHECK_THROWS_AS(solve_zero_tv(std::vector<double>{1, 2}, std::vector<double>{3, 4}), DomainError);
  CHECK_THROWS_AS(solve_zero_tv(std::vector<double>{1, 2, 3}, std::vector<double>{3, 4}), DimensionError);
}

TEST_CASE("random stochastic graphs are symmetric and row-stochastic") {
  Rng rng(4);
  for (int t = 0; t < 10; ++t) {
    const Matrix a = random_stochastic_graph(3 + rng.below(20), 0.4, rng);
    CHECK(symmetry_defect(a) == 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < a.cols(); ++j) {
        CHECK(a(i, j) >= 0.0);
        s += a(i, j);
      }
      CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK(spectral_radius(a) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("Haar filtering never increases graph variation") {
  Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    const Matrix a = random_stochastic_graph(3 + rng.below(20), 0.3, rng);
    const VariationReport r = check_tv_decrease(a, 10, rng.next());
    CHECK(r.violations == 0);
    CHECK(r.trials == 10);
  }
  // A matrix with spectral radius 2 violates the hypothesis.
  CHECK_THROWS_AS(check_tv_decrease(scaled(Matrix::identity(3), 2.0), 1, 0), PreconditionError);
}

TEST_CASE("Laplacian smoothing decreases variation for mu >= 1 but not for mu = 0.5") {
  Rng rng(6);
  for (int t = 0; t < 50; ++t) {
    const Matrix a = random_stochastic_graph(3 + rng.below(20), 0.3, rng);
    CHECK(check_laplacian_smoothing(a, 1.0, 10, rng.next()).violations == 0);
  }
  // Counterexample at mu = 0.5: an edge of weight 0.1 has Laplacian eigenvalue 0.2 on (1, -1),
  // where the filter gain 1/(0.5 + 0.2) exceeds one.
  const Matrix edge{{0, 0.1}, {0.1, 0}};
  const VariationReport r = check_laplacian_smoothing(edge, 0.5, 10, 1);
  CHECK(r.violations > 0);
  CHECK(r.worst_margin < 0.0);
}
