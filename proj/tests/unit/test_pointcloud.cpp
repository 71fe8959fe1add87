#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "doctest.h"
#include "foldgraph/errors.hpp"
#include "foldgraph/pointcloud.hpp"
#include "op_cases.hpp"
#include "oracles.hpp"

using namespace foldgraph;
namespace fs = std::filesystem;
using foldgraph::testing::random_matrix;

namespace {

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "foldgraph_unit";
  fs::create_directories(dir);
  return dir / name;
}

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

}  // namespace

TEST_CASE("chamfer distances equal the brute-force oracle exactly") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix s = random_matrix(1 + rng.below(30), 3, rng);
    const Matrix r = random_matrix(1 + rng.below(30), 3, rng);
    const PointCloud cs(s), cr(r);
    CHECK(augmented_chamfer(cs, cr).first == foldgraph::testing::brute_augmented_chamfer(s, r));
    CHECK(chamfer_plain(cs, cr) == foldgraph::testing::brute_chamfer(s, r));
  }
}

TEST_CASE("chamfer of a cloud with itself is zero and ties pick the lowest index") {
  const Matrix s{{0, 0, 0}, {1, 0, 0}};
  const Matrix r{{0.5, 0, 0}, {0.5, 0, 0}};
  const MatchResult m = match_points(s, r);
  CHECK(m.forward_idx[0] == 0);
  CHECK(m.forward_idx[1] == 0);
  CHECK(m.backward_idx[0] == 0);
  CHECK(augmented_chamfer(PointCloud(s), PointCloud(s)).first == 0.0);
}

TEST_CASE("augmented chamfer is the max and plain chamfer the sum of the directions") {
  const Matrix s{{0, 0, 0}};
  const Matrix r{{0, 0, 0}, {3, 4, 0}};
  const MatchResult m = match_points(s, r);
  CHECK(m.d_forward == 0.0);
  CHECK(m.d_backward == 2.5);
  CHECK(augmented_chamfer(PointCloud(s), PointCloud(r)).first == 2.5);
  CHECK(chamfer_plain(PointCloud(s), PointCloud(r)) == 2.5);
}

TEST_CASE("augmented chamfer gradient splits evenly on an exact tie") {
  // Both directional terms equal 1.
  const Matrix s{{0, 0, 0}};
  const Matrix r{{1, 0, 0}};
  const MatchResult m = match_points(s, r);
  const Matrix g = augmented_chamfer_grad(s, r, m);
  CHECK(g(0, 0) == doctest::Approx(1.0));
  const Matrix gp = chamfer_plain_grad(s, r, m);
  CHECK(gp(0, 0) == doctest::Approx(2.0));
}

TEST_CASE("empty or malformed clouds are rejected") {
  CHECK_THROWS_AS(PointCloud(Matrix(0, 3)), DomainError);
  CHECK_THROWS_AS(PointCloud(Matrix(2, 2)), DimensionError);
  CHECK_THROWS_AS(PointCloud(Matrix{{0, std::numeric_limits<double>::quiet_NaN(), 0}}), DomainError);
  CHECK_THROWS_AS(PointCloud(Matrix(2, 3), std::vector<double>{1.0}), DimensionError);
}

TEST_CASE("unit cube normalization keeps the aspect ratio") {
  const PointCloud c(Matrix{{-2, 0, 5}, {2, 1, 5}});
  const PointCloud n = normalize_unit_cube(c);
  CHECK(n.points()(0, 0) == 0.0);
  CHECK(n.points()(1, 0) == 1.0);
  CHECK(n.points()(1, 1) - n.points()(0, 1) == doctest::Approx(0.25));
  CHECK(n.points()(0, 2) == 0.5);
}

TEST_CASE("synthetic samples lie on their surfaces and are seed-deterministic") {
  for (auto shape : {SyntheticShape::sphere, SyntheticShape::torus, SyntheticShape::cube_surface,
                     SyntheticShape::plane, SyntheticShape::z_curve, SyntheticShape::double_torus}) {
    CAPTURE(shape_name(shape));
    CHECK(parse_shape(shape_name(shape)) == shape);
    const PointCloud a = sample_synthetic(shape, 300, {}, 7);
    CHECK(a == sample_synthetic(shape, 300, {}, 7));
    CHECK(!(a == sample_synthetic(shape, 300, {}, 8)));
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(shape_residual(shape, {}, a.point(i))) < 1e-9);
  }
  CHECK_THROWS_AS(parse_shape("klein_bottle"), DomainError);
  CHECK_THROWS_AS(sample_synthetic(SyntheticShape::torus, 10, {{"r", 2.0}}, 0), DomainError);
  CHECK_THROWS_AS(sample_synthetic(SyntheticShape::sphere, 10, {{"R", 2.0}}, 0), DomainError);
}

TEST_CASE("xyz and ply round trips are exact") {
  Rng rng(3);
  const PointCloud c(random_matrix(17, 3, rng, -1e3, 1e3), std::vector<double>(17, 0.25));
  const fs::path xyz = temp_file("rt.xyz"), ply = temp_file("rt.ply");
  write_xyz(xyz, c);
  CHECK(read_cloud(xyz).points() == c.points());
  write_ply_ascii(ply, c);
  const PointCloud back = read_cloud(ply);
  CHECK(back.points() == c.points());
  REQUIRE(back.has_scalar());
  CHECK(*back.scalar() == *c.scalar());
  CHECK(format_double(0.1) == "0.10000000000000001");
}

TEST_CASE("parse errors report the offending line") {
  const fs::path bad = temp_file("bad.xyz");
  write_text(bad, "0 0 0\n# comment\n1 2\n");
  try {
    read_xyz(bad);
    FAIL("expected a ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  write_text(bad, "0 0 0\n1 x 2\n");
  CHECK_THROWS_AS(read_xyz(bad), ParseError);

  const fs::path ply = temp_file("bad.ply");
  write_text(ply, "ply\nformat binary_little_endian 1.0\nelement vertex 1\nend_header\n");
  try {
    read_ply_ascii(ply);
    FAIL("expected a ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  write_text(ply, "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\n"
                  "property float z\nend_header\n0 0 0\n");
  CHECK_THROWS_AS(read_ply_ascii(ply), ParseError);
  write_text(ply, "ply\nformat ascii 1.0\ncomment made by hand\nelement vertex 1\nproperty float x\n"
                  "property float y\nproperty float z\nproperty float intensity\nend_header\n1 2 3 4\n");
  CHECK(read_ply_ascii(ply).points() == Matrix{{1, 2, 3}});
  CHECK_THROWS_AS(read_cloud(temp_file("cloud.obj")), DomainError);
}
