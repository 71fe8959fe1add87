#include <cmath>

#include "doctest.h"
#include "foldgraph/autodiff.hpp"
#include "foldgraph/errors.hpp"
#include "foldgraph/network.hpp"
#include "op_cases.hpp"

using namespace foldgraph;
using foldgraph::testing::check_gradients;

TEST_CASE("every op passes a central finite-difference check") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    for (const auto& c : foldgraph::testing::make_op_cases(rng)) {
      CAPTURE(c.name);
      CAPTURE(seed);
      const auto r = check_gradients(c.leaves, c.loss);
      CHECK(r.checked > 0);
      CHECK(r.rel_error < 1e-4);
    }
  }
}

TEST_CASE("spd_solve gradient is symmetric and matches paired perturbations") {
  Rng rng(9);
  const Matrix p = foldgraph::testing::random_matrix(4, 4, rng);
  Matrix a = add(matmul(p, transpose(p)), scaled(Matrix::identity(4), 3.0));
  ad::Tensor A = ad::Tensor::leaf(a);
  ad::Tensor B = foldgraph::testing::random_leaf({4, 2}, rng);
  ad::Tensor W = foldgraph::testing::random_leaf({4, 2}, rng);
  auto loss = [&] {
    ad::Tape t;
    return foldgraph::testing::weighted_sum(t, t.spd_solve(A, B), W).item();
  };
  {
    ad::Tape t;
    t.backward(foldgraph::testing::weighted_sum(t, t.spd_solve(A, B), W));
  }
  const auto g = A.grad();
  const double h = 1e-6;
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      CHECK(g[i * 4 + j] == doctest::Approx(g[j * 4 + i]).epsilon(1e-12));
      auto vals = A.values();
      const double sij = vals[i * 4 + j], sji = vals[j * 4 + i];
      vals[i * 4 + j] = sij + h;
      if (i != j) vals[j * 4 + i] = sji + h;
      const double up = loss();
      vals[i * 4 + j] = sij - h;
      if (i != j) vals[j * 4 + i] = sji - h;
      const double down = loss();
      vals[i * 4 + j] = sij;
      vals[j * 4 + i] = sji;
      const double numeric = (up - down) / (2 * h);
      const double analytic = i == j ? g[i * 4 + i] : g[i * 4 + j] + g[j * 4 + i];
      CHECK(analytic == doctest::Approx(numeric).epsilon(1e-6));
    }
  }
}

TEST_CASE("full model loss matches finite differences for every filter") {
  for (FilterKind f : {FilterKind::none, FilterKind::adjacency, FilterKind::laplacian}) {
    CAPTURE(filter_name(f));
    const Model model(foldgraph::testing::tiny_model_config(f), 3);
    Rng rng(17);
    const Matrix src = foldgraph::testing::random_matrix(20, 3, rng, 0.0, 1.0);
    std::vector<ad::Tensor> leaves;
    for (const auto& [name, t] : model.parameters()) leaves.push_back(t);
    auto loss = [&](ad::Tape& t, const std::vector<ad::Tensor>&) {
      return chamfer_loss(t, src, model.forward(t, src).refined, LossKind::augmented);
    };
    const auto r = check_gradients(leaves, loss, 1e-6, 60, &rng);
    CHECK(r.rel_error < 1e-3);
  }
}

TEST_CASE("leaf gradients accumulate across backward calls") {
  ad::Tensor x = ad::Tensor::leaf({3}, {1.0, 2.0, 3.0});
  for (int k = 0; k < 2; ++k) {
    ad::Tape t;
    t.backward(t.sum(t.scale(x, 2.0)));
  }
  for (double g : x.grad()) CHECK(g == 4.0);
  x.zero_grad();
  for (double g : x.grad()) CHECK(g == 0.0);
}

TEST_CASE("a tensor used twice receives both contributions") {
  ad::Tensor x = ad::Tensor::leaf({2}, {3.0, -1.0});
  ad::Tape t;
  t.backward(t.sum(t.mul(x, x)));
  CHECK(x.grad()[0] == 6.0);
  CHECK(x.grad()[1] == -2.0);
}

TEST_CASE("shape mismatches name both operands") {
  ad::Tape t;
  const ad::Tensor a = ad::Tensor::leaf(ad::Shape{2, 3}), b = ad::Tensor::leaf(ad::Shape{2, 3});
  CHECK_THROWS_AS(t.matmul(a, b), DimensionError);
  try {
    t.matmul(a, b);
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
  }
  CHECK_THROWS_AS(t.add(a, ad::Tensor::leaf(ad::Shape{3, 2})), DimensionError);
  CHECK_THROWS_AS(t.reshape(a, {4, 2}), DimensionError);
  CHECK_THROWS_AS(t.add_identity(a, 1.0), DimensionError);
}

TEST_CASE("spd_solve rejects a matrix that is not positive definite") {
  ad::Tape t;
  const ad::Tensor a = ad::Tensor::leaf({2, 2}, {1.0, 2.0, 2.0, 1.0});
  CHECK_THROWS_AS(t.spd_solve(a, ad::Tensor::leaf({2, 1}, {1.0, 1.0})), NumericalError);
}

TEST_CASE("maxpool routes the gradient to the lowest tied row") {
  ad::Tensor x = ad::Tensor::leaf({3, 1}, {2.0, 2.0, 1.0});
  ad::Tape t;
  t.backward(t.sum(t.maxpool_over_points(x)));
  CHECK(x.grad()[0] == 1.0);
  CHECK(x.grad()[1] == 0.0);
  CHECK(x.grad()[2] == 0.0);
}

TEST_CASE("softmax rows sum to one even for large logits") {
  ad::Tape t;
  const ad::Tensor y = t.softmax_rows(ad::Tensor::leaf({2, 3}, {1000.0, 1001.0, 999.0, -5.0, 0.0, 5.0}));
  for (std::size_t r = 0; r < 2; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < 3; ++c) s += y.value(r * 3 + c);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
  }
}
