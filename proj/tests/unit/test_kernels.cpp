#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "doctest.h"
#include "foldgraph/errors.hpp"
#include "foldgraph/kernels.hpp"
#include "foldgraph/rng.hpp"

using namespace foldgraph;
using kernels::Isa;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-2.0, 2.0);
  return v;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
  return true;
}

std::vector<Isa> simd_variants() {
  std::vector<Isa> out;
  for (Isa isa : {Isa::avx2, Isa::neon})
    if (kernels::isa_available(isa)) out.push_back(isa);
  return out;
}

}  // namespace

TEST_CASE("scalar kernels are always available and selectable") {
  CHECK(kernels::isa_available(Isa::scalar));
  const Isa before = kernels::active_isa();
  kernels::set_active_isa(Isa::scalar);
  CHECK(kernels::active_isa() == Isa::scalar);
  kernels::set_active_isa(before);
  for (Isa isa : {Isa::avx2, Isa::neon}) {
    if (!kernels::isa_available(isa)) CHECK_THROWS_AS(kernels::set_active_isa(isa), DomainError);
  }
}

TEST_CASE("gemm_acc matches a naive triple loop") {
  Rng rng(11);
  const auto& ref = kernels::table(Isa::scalar);
  const std::size_t m = 5, k = 7, n = 9;
  const auto a = random_vec(m * k, rng), b = random_vec(k * n, rng);
  std::vector<double> c(m * n, 0.5), expect(m * n, 0.5);
  ref.gemm_acc(m, k, n, a.data(), b.data(), c.data());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t p = 0; p < k; ++p) expect[i * n + j] += a[i * k + p] * b[p * n + j];
  CHECK(bitwise_equal(c, expect));
}

TEST_CASE("relu maps NaN and negative zero to positive zero") {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> x{-0.0, nan, -1.0, 2.0, 0.0}, y(5);
  for (Isa isa : {Isa::scalar, Isa::avx2, Isa::neon}) {
    if (!kernels::isa_available(isa)) continue;
    kernels::table(isa).relu(x.size(), x.data(), y.data());
    CHECK(std::bit_cast<std::uint64_t>(y[0]) == 0);
    CHECK(std::bit_cast<std::uint64_t>(y[1]) == 0);
    CHECK(y[2] == 0.0);
    CHECK(y[3] == 2.0);
  }
}

TEST_CASE("SIMD kernels are bitwise identical to the scalar reference") {
  const auto variants = simd_variants();
  if (variants.empty()) return;
  const auto& ref = kernels::table(Isa::scalar);
  Rng rng(2024);
  for (Isa isa : variants) {
    const auto& tab = kernels::table(isa);
    CAPTURE(kernels::isa_name(isa));
    for (std::size_t trial = 0; trial < 60; ++trial) {
      const std::size_t m = 1 + rng.below(9), k = 1 + rng.below(19), n = rng.below(37);
      // Offset by one element so vector loads are unaligned.
      auto a = random_vec(m * k + 1, rng), b = random_vec(k * n + 1, rng), c0 = random_vec(m * n + 1, rng);
      auto c1 = c0, c2 = c0;
      ref.gemm_acc(m, k, n, a.data() + 1, b.data() + 1, c1.data() + 1);
      tab.gemm_acc(m, k, n, a.data() + 1, b.data() + 1, c2.data() + 1);
      CHECK(bitwise_equal(c1, c2));

      const std::size_t len = rng.below(41);
      auto xs = random_vec(len + 1, rng), ys = random_vec(len + 1, rng), zs = random_vec(len + 1, rng);
      std::vector<double> d1(len + 1), d2(len + 1);
      ref.sq_dist_row(0.3, -0.7, 1.1, xs.data() + 1, ys.data() + 1, zs.data() + 1, len, d1.data() + 1);
      tab.sq_dist_row(0.3, -0.7, 1.1, xs.data() + 1, ys.data() + 1, zs.data() + 1, len, d2.data() + 1);
      CHECK(bitwise_equal(d1, d2));

      auto y1 = random_vec(len + 1, rng), y2 = y1;
      ref.axpy(len, -0.37, xs.data() + 1, y1.data() + 1);
      tab.axpy(len, -0.37, xs.data() + 1, y2.data() + 1);
      CHECK(bitwise_equal(y1, y2));

      std::vector<double> r1(len + 1), r2(len + 1);
      ref.relu(len, xs.data() + 1, r1.data() + 1);
      tab.relu(len, xs.data() + 1, r2.data() + 1);
      CHECK(bitwise_equal(r1, r2));

      const kernels::AdamCoeffs co{1e-3, 0.9, 0.999, 1e-8, 1.0 - std::pow(0.9, 3.0), 1.0 - std::pow(0.999, 3.0)};
      auto g = random_vec(len, rng), m1 = random_vec(len, rng), v1 = random_vec(len, rng), p1 = random_vec(len, rng);
      for (double& v : v1) v = std::abs(v);
      auto m2 = m1, v2 = v1, p2 = p1;
      ref.adam_update(len, co, g.data(), m1.data(), v1.data(), p1.data());
      tab.adam_update(len, co, g.data(), m2.data(), v2.data(), p2.data());
      CHECK(bitwise_equal(m1, m2));
      CHECK(bitwise_equal(v1, v2));
      CHECK(bitwise_equal(p1, p2));
    }
  }
}
