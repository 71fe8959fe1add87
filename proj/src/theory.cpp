#include "foldgraph/theory.hpp"

#include <cmath>
#include <string>

#include "foldgraph/errors.hpp"
#include "foldgraph/graph_signal.hpp"

namespace foldgraph {

std::size_t voxel_index(std::size_t k_res, std::size_t i, std::size_t j, std::size_t k) noexcept {
  return (i * k_res + j) * k_res + k;
}

std::array<std::size_t, 3> voxel_triple(std::size_t k_res, std::size_t flat) noexcept {
  return {flat / (k_res * k_res), (flat / k_res) % k_res, flat % k_res};
}

namespace {

void require_full(const VoxelCode& code, const char* what) {
  if (code.stride != StridePolicy::every_voxel ||
      code.occupancy.size() != code.k_res * code.k_res * code.k_res) {
    throw DimensionError(std::string(what) + ": expected a full K^3 occupancy code");
  }
}

std::string triple_string(const std::array<std::size_t, 3>& t) {
  return "(" + std::to_string(t[0]) + ", " + std::to_string(t[1]) + ", " + std::to_string(t[2]) + ")";
}

bool even_voxel(const std::array<std::size_t, 3>& t) { return (t[0] + t[1] + t[2]) % 2 == 0; }

}  // namespace

VoxelCode voxel_encode(const PointCloud& s, std::size_t k_res) {
  if (k_res == 0) throw DomainError("voxel resolution K must be at least 1");
  VoxelCode code{k_res, StridePolicy::every_voxel, std::vector<std::uint8_t>(k_res * k_res * k_res, 0)};
  const double kd = static_cast<double>(k_res);
  for (std::size_t p = 0; p < s.size(); ++p) {
    const auto x = s.point(p);
    std::array<std::size_t, 3> idx{};
    for (int a = 0; a < 3; ++a) {
      if (!(x[a] >= 0.0 && x[a] <= 1.0)) {
        throw DomainError("point " + std::to_string(p) + " (" + format_double(x[0]) + ", " +
                          format_double(x[1]) + ", " + format_double(x[2]) +
                          ") lies outside the unit cube");
      }
      idx[a] = std::min(static_cast<std::size_t>(std::floor(x[a] * kd)), k_res - 1);
    }
    code.occupancy[voxel_index(k_res, idx[0], idx[1], idx[2])] = 1;
  }
  return code;
}

PointCloud voxel_decode(const VoxelCode& code, ProxyMode mode) {
  require_full(code, "voxel_decode");
  const double kd = static_cast<double>(code.k_res);
  const double offset = mode == ProxyMode::center ? 0.5 : 1.0;
  std::vector<double> pts;
  for (std::size_t f = 0; f < code.occupancy.size(); ++f) {
    if (!code.occupancy[f]) continue;
    for (const std::size_t t : voxel_triple(code.k_res, f)) pts.push_back((static_cast<double>(t) + offset) / kd);
  }
  if (pts.empty()) throw DomainError("voxel_decode: no occupied voxel");
  const std::size_t n = pts.size() / 3;
  return PointCloud(Matrix(n, 3, std::move(pts)));
}

std::string Certificate::format() const {
  return "theorem " + std::to_string(theorem) + " K " + std::to_string(k_res) + " C " +
         std::to_string(code_len) + " distance " + format_double(distance) + " bound " +
         format_double(bound) + (pass ? " PASS" : " FAIL");
}

double thm1_bound(double code_len) { return std::sqrt(3.0) / (2.0 * std::cbrt(code_len)); }
double thm2_bound(double code_len) { return 1.0 / std::cbrt(2.0 * code_len); }

Certificate certify_thm1(const PointCloud& s, std::size_t k_res, ProxyMode mode) {
  const VoxelCode code = voxel_encode(s, k_res);
  const PointCloud rec = voxel_decode(code, mode);
  Certificate c;
  c.theorem = 1;
  c.k_res = k_res;
  c.code_len = code.code_len();
  c.distance = augmented_chamfer(s, rec).first;
  c.bound = std::sqrt(3.0) / (2.0 * static_cast<double>(k_res));
  c.pass = c.distance <= c.bound + 1e-12;
  return c;
}

std::optional<std::array<std::size_t, 3>> find_smoothness_violation(const VoxelCode& full) {
  require_full(full, "find_smoothness_violation");
  const std::size_t kr = full.k_res;
  for (std::size_t f = 0; f < full.occupancy.size(); ++f) {
    const auto [i, j, k] = voxel_triple(kr, f);
    const std::uint8_t self = full.occupancy[f];
    bool matched = false;
    for (std::size_t d = 1; d < 8 && !matched; ++d) {
      const std::size_t ni = std::min(i + (d >> 2 & 1), kr - 1);
      const std::size_t nj = std::min(j + (d >> 1 & 1), kr - 1);
      const std::size_t nk = std::min(k + (d & 1), kr - 1);
      matched = full.occupancy[voxel_index(kr, ni, nj, nk)] == self;
    }
    if (!matched) return std::array<std::size_t, 3>{i, j, k};
  }
  return std::nullopt;
}

VoxelCode stride_encode(const VoxelCode& full) {
  require_full(full, "stride_encode");
  VoxelCode out{full.k_res, StridePolicy::every_other, {}};
  for (std::size_t f = 0; f < full.occupancy.size(); ++f)
    if (even_voxel(voxel_triple(full.k_res, f))) out.occupancy.push_back(full.occupancy[f]);
  return out;
}

VoxelCode stride_interpolate(const VoxelCode& strided) {
  const std::size_t kr = strided.k_res;
  const std::size_t total = kr * kr * kr;
  if (strided.stride != StridePolicy::every_other || strided.occupancy.size() != (total + 1) / 2) {
    throw DimensionError("stride_interpolate: expected an every-other-voxel code");
  }
  std::vector<std::uint8_t> recovered(total, 0);
  std::size_t next = 0;
  for (std::size_t f = 0; f < total; ++f)
    if (even_voxel(voxel_triple(kr, f))) recovered[f] = strided.occupancy[next++];

  VoxelCode out{kr, StridePolicy::every_voxel, std::vector<std::uint8_t>(total, 0)};
  for (std::size_t f = 0; f < total; ++f) {
    const auto [i, j, k] = voxel_triple(kr, f);
    for (std::size_t d = 0; d < 8; ++d) {
      const std::size_t ni = i + (d >> 2 & 1), nj = j + (d >> 1 & 1), nk = k + (d & 1);
      if (ni >= kr || nj >= kr || nk >= kr) continue;
      if (recovered[voxel_index(kr, ni, nj, nk)]) {
        out.occupancy[f] = 1;
        break;
      }
    }
  }
  return out;
}

Certificate certify_thm2(const PointCloud& s, std::size_t k_res) {
  const VoxelCode full = voxel_encode(s, k_res);
  if (const auto bad = find_smoothness_violation(full)) {
    throw PreconditionError("occupancy violates the smoothness condition at voxel " + triple_string(*bad));
  }
  const VoxelCode strided = stride_encode(full);
  const PointCloud rec = voxel_decode(stride_interpolate(strided));
  Certificate c;
  c.theorem = 2;
  c.k_res = k_res;
  c.code_len = strided.code_len();
  c.distance = augmented_chamfer(s, rec).first;
  c.bound = 1.0 / static_cast<double>(k_res);
  c.pass = c.distance <= c.bound + 1e-12;
  return c;
}

Matrix solve_zero_tv(std::span<const double> x1, std::span<const double> x2) {
  if (x1.size() != x2.size()) {
    throw DimensionError("solve_zero_tv: signals of length " + std::to_string(x1.size()) + " and " +
                         std::to_string(x2.size()));
  }
  const std::size_t m = x1.size();
  if (m <= 2) throw DomainError("solve_zero_tv: needs more than two nodes, got " + std::to_string(m));

  auto dot = [m](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += a[i] * b[i];
    return s;
  };
  // Orthonormal basis of span{x1, x2}. Stacking the per-row minimum-norm
  // solutions gives Q·Qᵀ, so the projector is formed directly.
  std::vector<std::vector<double>> basis;
  for (const auto x : {x1, x2}) {
    std::vector<double> v(x.begin(), x.end());
    const double scale = std::sqrt(dot(v, v));
    if (scale == 0.0) continue;
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& q : basis) {
        const double c = dot(q, v);
        for (std::size_t i = 0; i < m; ++i) v[i] -= c * q[i];
      }
    }
    const double norm = std::sqrt(dot(v, v));
    if (norm <= 1e-12 * scale) continue;
    for (double& e : v) e /= norm;
    basis.push_back(std::move(v));
  }

  Matrix a(m, m, 0.0);
  for (const auto& q : basis)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) a(i, j) += q[i] * q[j];

  if (frobenius_norm(add(a, scaled(Matrix::identity(m), -1.0))) <= 1e-8) {
    // Shrink along a direction orthogonal to both signals; the fixed points are untouched.
    std::vector<double> n(m, 0.0);
    for (std::size_t e = 0; e < m; ++e) {
      std::fill(n.begin(), n.end(), 0.0);
      n[e] = 1.0;
      for (const auto& q : basis) {
        const double c = dot(q, n);
        for (std::size_t i = 0; i < m; ++i) n[i] -= c * q[i];
      }
      if (dot(n, n) > 0.25) break;
    }
    const double nn = dot(n, n);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) a(i, j) -= 1e-3 * n[i] * n[j] / nn;
  }
  return a;
}

Matrix random_stochastic_graph(std::size_t m, double edge_probability, Rng& rng) {
  Matrix w(m, m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      if (rng.uniform() < edge_probability) {
        const double x = rng.uniform(0.1, 1.0);
        w(i, j) = x;
        w(j, i) = x;
      }
    }
  }
  std::vector<double> deg(m, 0.0);
  double dmax = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) deg[i] += w(i, j);
    dmax = std::max(dmax, deg[i]);
  }
  if (dmax == 0.0) return Matrix::identity(m);
  Matrix a(m, m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) a(i, j) = w(i, j) / dmax;
    a(i, i) = 1.0 - deg[i] / dmax;
  }
  return a;
}

namespace {

std::vector<double> normal_vector(std::size_t m, Rng& rng) {
  std::vector<double> x(m);
  for (double& e : x) e = rng.normal();
  return x;
}

void record(VariationReport& r, double before, double after) {
  const double margin = before - after;
  if (r.trials == 0 || margin < r.worst_margin) r.worst_margin = margin;
  if (after > before + 1e-10) ++r.violations;
  ++r.trials;
}

}  // namespace

VariationReport check_tv_decrease(const Matrix& a, std::size_t trials, std::uint64_t seed) {
  VariationReport report;
  report.radius = spectral_radius(a);
  if (report.radius > 1.0 + 1e-9) {
    throw PreconditionError("check_tv_decrease: spectral radius " + format_double(report.radius) +
                            " exceeds 1");
  }
  Rng rng(seed);
  const std::size_t m = a.rows();
  for (std::size_t t = 0; t < trials; ++t) {
    const Matrix x(m, 1, normal_vector(m, rng));
    const Matrix hx = haar_filter(a, x);
    record(report, graph_tv(a, x.values(), report.radius), graph_tv(a, hx.values(), report.radius));
  }
  return report;
}

VariationReport check_laplacian_smoothing(const Matrix& a, double mu, std::size_t trials,
                                          std::uint64_t seed) {
  VariationReport report;
  const Matrix lap = laplacian_matrix(a);
  Rng rng(seed);
  const std::size_t m = a.rows();
  for (std::size_t t = 0; t < trials; ++t) {
    const Matrix x(m, 1, normal_vector(m, rng));
    const Matrix hx = laplacian_filter(a, x, mu);
    record(report, quadratic_variation(lap, x.values()), quadratic_variation(lap, hx.values()));
  }
  return report;
}

ZShapeExample z_shape_example() {
  ZShapeExample z;
  z.grid = Matrix{{0, 1, 1, 1}, {0, 0, 1, 0}, {0, 1, 0, 0}, {1, 1, 1, 0}};
  z.x1 = {1, 1, 1, 2, 3, 4, 4, 4};
  z.x2 = {2, 3, 4, 3, 2, 1, 2, 3};
  z.adjacency = Matrix{{1, 0, 0, 0, 0, 0, 0, 0},       {0.5, 0, 0.5, 0, 0, 0, 0, 0},
                       {0, 0, 1, 0, 0, 0, 0, 0},       {0, 0, 0.5, 0, 0.5, 0, 0, 0},
                       {0, 0, 0, 0.5, 0, 0.5, 0, 0},   {0, 0, 0, 0, 0, 1, 0, 0},
                       {0, 0, 0, 0, 0, 0.5, 0, 0.5},   {0, 0, 0, 0, 0, 0, 0, 1}};
  return z;
}

}  // namespace foldgraph
