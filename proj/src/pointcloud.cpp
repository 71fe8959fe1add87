#include "foldgraph/pointcloud.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <string>

#include "foldgraph/errors.hpp"
#include "foldgraph/kernels.hpp"
#include "foldgraph/rng.hpp"

namespace foldgraph {

PointCloud::PointCloud(Matrix points, std::optional<std::vector<double>> scalar)
    : points_(std::move(points)), scalar_(std::move(scalar)) {
  if (points_.cols() != 3 && points_.rows() != 0) {
    throw DimensionError("point cloud needs 3 columns, got " + points_.shape_string());
  }
  if (points_.rows() == 0) throw DomainError("point cloud must hold at least one point");
  for (double v : points_.values()) {
    if (!std::isfinite(v)) throw DomainError("point cloud coordinates must be finite");
  }
  if (scalar_ && scalar_->size() != points_.rows()) {
    throw DimensionError("scalar channel has " + std::to_string(scalar_->size()) +
                         " entries for " + std::to_string(points_.rows()) + " points");
  }
}

PointCloud PointCloud::with_scalar(std::vector<double> scalar) const {
  return PointCloud(points_, std::move(scalar));
}

// ---- Chamfer ----------------------------------------------------------------------------------

namespace {

void require_points(const Matrix& m, const char* what) {
  if (m.rows() == 0) throw DomainError(std::string(what) + " cloud is empty");
  if (m.cols() != 3) throw DimensionError(std::string(what) + " cloud is not N x 3: " + m.shape_string());
}

struct Soa {
  std::vector<double> x, y, z;
  explicit Soa(const Matrix& m) : x(m.rows()), y(m.rows()), z(m.rows()) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
      x[i] = m(i, 0);
      y[i] = m(i, 1);
      z[i] = m(i, 2);
    }
  }
};

}  // namespace

MatchResult match_points(const Matrix& s, const Matrix& r) {
  require_points(s, "source");
  require_points(r, "reconstruction");
  const std::size_t n = s.rows(), m = r.rows();
  const Soa rs(r);

  MatchResult out;
  out.forward_idx.assign(n, 0);
  out.backward_idx.assign(m, 0);
  std::vector<double> row_min(n, std::numeric_limits<double>::infinity());
  std::vector<double> col_min(m, std::numeric_limits<double>::infinity());
  std::vector<double> d2(m);

  for (std::size_t i = 0; i < n; ++i) {
    kernels::sq_dist_row(s(i, 0), s(i, 1), s(i, 2), rs.x.data(), rs.y.data(), rs.z.data(), m,
                         d2.data());
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t j = 0; j < m; ++j) {
      const double d = d2[j];
      if (d < best) {
        best = d;
        arg = j;
      }
      if (d < col_min[j]) {
        col_min[j] = d;
        out.backward_idx[j] = i;
      }
    }
    row_min[i] = best;
    out.forward_idx[i] = arg;
  }

  double fwd = 0.0;
  for (std::size_t i = 0; i < n; ++i) fwd += std::sqrt(row_min[i]);
  double bwd = 0.0;
  for (std::size_t j = 0; j < m; ++j) bwd += std::sqrt(col_min[j]);
  out.d_forward = fwd / static_cast<double>(n);
  out.d_backward = bwd / static_cast<double>(m);
  return out;
}

std::pair<double, MatchResult> augmented_chamfer(const PointCloud& s, const PointCloud& r) {
  MatchResult match = match_points(s.points(), r.points());
  const double d = std::max(match.d_forward, match.d_backward);
  return {d, std::move(match)};
}

double chamfer_plain(const PointCloud& s, const PointCloud& r) {
  const MatchResult match = match_points(s.points(), r.points());
  return match.d_forward + match.d_backward;
}

namespace {

void accumulate_unit(const Matrix& s, const Matrix& r, std::size_t si, std::size_t rj, double w,
                     Matrix& grad) {
  const double dx = r(rj, 0) - s(si, 0);
  const double dy = r(rj, 1) - s(si, 1);
  const double dz = r(rj, 2) - s(si, 2);
  const double dist = std::sqrt((dx * dx + dy * dy) + dz * dz);
  if (dist == 0.0) return;  // subgradient 0 at coincident points
  grad(rj, 0) += w * dx / dist;
  grad(rj, 1) += w * dy / dist;
  grad(rj, 2) += w * dz / dist;
}

void add_forward_term(const Matrix& s, const Matrix& r, const MatchResult& match, double weight,
                      Matrix& grad) {
  const double w = weight / static_cast<double>(s.rows());
  for (std::size_t i = 0; i < s.rows(); ++i) accumulate_unit(s, r, i, match.forward_idx[i], w, grad);
}

void add_backward_term(const Matrix& s, const Matrix& r, const MatchResult& match, double weight,
                       Matrix& grad) {
  const double w = weight / static_cast<double>(r.rows());
  for (std::size_t j = 0; j < r.rows(); ++j) accumulate_unit(s, r, match.backward_idx[j], j, w, grad);
}

}  // namespace

Matrix augmented_chamfer_grad(const Matrix& s, const Matrix& r, const MatchResult& match) {
  Matrix grad(r.rows(), 3);
  if (match.d_forward > match.d_backward) {
    add_forward_term(s, r, match, 1.0, grad);
  } else if (match.d_backward > match.d_forward) {
    add_backward_term(s, r, match, 1.0, grad);
  } else {
    add_forward_term(s, r, match, 0.5, grad);
    add_backward_term(s, r, match, 0.5, grad);
  }
  return grad;
}

Matrix chamfer_plain_grad(const Matrix& s, const Matrix& r, const MatchResult& match) {
  Matrix grad(r.rows(), 3);
  add_forward_term(s, r, match, 1.0, grad);
  add_backward_term(s, r, match, 1.0, grad);
  return grad;
}

// ---- normalization ----------------------------------------------------------------------------

PointCloud normalize_unit_cube(const PointCloud& s) {
  const Matrix& p = s.points();
  std::array<double, 3> lo{}, hi{};
  for (std::size_t a = 0; a < 3; ++a) {
    lo[a] = hi[a] = p(0, a);
    for (std::size_t i = 1; i < p.rows(); ++i) {
      lo[a] = std::min(lo[a], p(i, a));
      hi[a] = std::max(hi[a], p(i, a));
    }
  }
  const double extent = std::max({hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]});
  Matrix out(p.rows(), 3);
  for (std::size_t a = 0; a < 3; ++a) {
    const double mid = 0.5 * (lo[a] + hi[a]);
    for (std::size_t i = 0; i < p.rows(); ++i) {
      double v = extent > 0.0 ? 0.5 + (p(i, a) - mid) / extent : 0.5;
      out(i, a) = std::clamp(v, 0.0, 1.0);
    }
  }
  return PointCloud(std::move(out), s.scalar());
}

// ---- synthetic shapes -------------------------------------------------------------------------

namespace {

struct ShapeInfo {
  SyntheticShape shape;
  std::string_view name;
  std::vector<std::pair<std::string, double>> defaults;
};

const std::vector<ShapeInfo>& shape_table() {
  static const std::vector<ShapeInfo> table{
      {SyntheticShape::sphere, "sphere", {{"radius", 1.0}}},
      {SyntheticShape::torus, "torus", {{"R", 1.0}, {"r", 0.3}}},
      {SyntheticShape::cube_surface, "cube_surface", {{"side", 1.0}}},
      {SyntheticShape::plane, "plane", {{"side", 1.0}}},
      {SyntheticShape::z_curve, "z_curve", {{"side", 1.0}}},
      {SyntheticShape::double_torus, "double_torus", {{"R", 1.0}, {"r", 0.25}, {"d", 0.75}}},
  };
  return table;
}

const ShapeInfo& info(SyntheticShape shape) {
  for (const auto& s : shape_table())
    if (s.shape == shape) return s;
  throw DomainError("unknown shape");
}

ShapeParams resolve(SyntheticShape shape, const ShapeParams& given) {
  const ShapeInfo& si = info(shape);
  ShapeParams out;
  for (const auto& [k, v] : si.defaults) out[k] = v;
  for (const auto& [k, v] : given) {
    if (!out.count(k)) {
      throw DomainError("shape '" + std::string(si.name) + "' has no parameter '" + k + "'");
    }
    if (!std::isfinite(v)) throw DomainError("shape parameter '" + k + "' must be finite");
    out[k] = v;
  }
  auto positive = [&](const char* key) {
    if (!(out.at(key) > 0.0)) {
      throw DomainError("shape '" + std::string(si.name) + "': " + key + " must be positive");
    }
  };
  switch (shape) {
    case SyntheticShape::sphere: positive("radius"); break;
    case SyntheticShape::cube_surface:
    case SyntheticShape::plane:
    case SyntheticShape::z_curve: positive("side"); break;
    case SyntheticShape::torus:
    case SyntheticShape::double_torus:
      positive("R");
      positive("r");
      if (out.at("r") >= out.at("R")) {
        throw DomainError("torus minor radius must be smaller than the major radius");
      }
      if (shape == SyntheticShape::double_torus) {
        positive("d");
        if (out.at("d") >= out.at("R")) {
          throw DomainError("double_torus offset d must be below R so the two rings overlap");
        }
      }
      break;
  }
  return out;
}

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Area-uniform point on a torus around the z axis, centred at (cx, 0, 0).
std::array<double, 3> torus_point(Rng& rng, double big_r, double small_r, double cx) {
  for (;;) {
    const double u = kTwoPi * rng.uniform();
    const double v = kTwoPi * rng.uniform();
    const double ring = big_r + small_r * std::cos(v);
    if (rng.uniform() * (big_r + small_r) > ring) continue;
    return {cx + ring * std::cos(u), ring * std::sin(u), small_r * std::sin(v)};
  }
}

double torus_distance(std::span<const double> p, double big_r, double small_r, double cx) {
  const double rho = std::hypot(p[0] - cx, p[1]);
  return std::hypot(rho - big_r, p[2]) - small_r;
}

std::array<std::array<double, 2>, 4> z_corners(double side) {
  const double h = 0.5 * side;
  return {{{-h, h}, {h, h}, {-h, -h}, {h, -h}}};
}

double segment_distance(double px, double py, std::array<double, 2> a, std::array<double, 2> b) {
  const double vx = b[0] - a[0], vy = b[1] - a[1];
  const double t = std::clamp(((px - a[0]) * vx + (py - a[1]) * vy) / (vx * vx + vy * vy), 0.0, 1.0);
  return std::hypot(px - (a[0] + t * vx), py - (a[1] + t * vy));
}

}  // namespace

std::string_view shape_name(SyntheticShape shape) noexcept {
  for (const auto& s : shape_table())
    if (s.shape == shape) return s.name;
  return "unknown";
}

SyntheticShape parse_shape(std::string_view name) {
  for (const auto& s : shape_table())
    if (s.name == name) return s.shape;
  throw DomainError("unknown shape '" + std::string(name) + "'");
}

PointCloud sample_synthetic(SyntheticShape shape, std::size_t n, const ShapeParams& given,
                            std::uint64_t seed) {
  if (n == 0) throw DomainError("sample_synthetic: n must be at least 1");
  const ShapeParams prm = resolve(shape, given);
  Rng rng(seed);
  Matrix pts(n, 3);
  auto put = [&](std::size_t i, double x, double y, double z) {
    pts(i, 0) = x;
    pts(i, 1) = y;
    pts(i, 2) = z;
  };
  switch (shape) {
    case SyntheticShape::sphere: {
      const double radius = prm.at("radius");
      for (std::size_t i = 0; i < n; ++i) {
        double x, y, z, norm;
        do {
          x = rng.normal();
          y = rng.normal();
          z = rng.normal();
          norm = std::sqrt(x * x + y * y + z * z);
        } while (norm < 1e-12);
        put(i, radius * x / norm, radius * y / norm, radius * z / norm);
      }
      break;
    }
    case SyntheticShape::torus: {
      for (std::size_t i = 0; i < n; ++i) {
        const auto p = torus_point(rng, prm.at("R"), prm.at("r"), 0.0);
        put(i, p[0], p[1], p[2]);
      }
      break;
    }
    case SyntheticShape::cube_surface: {
      const double h = 0.5 * prm.at("side");
      for (std::size_t i = 0; i < n; ++i) {
        const auto face = rng.below(6);
        const double a = rng.uniform(-h, h), b = rng.uniform(-h, h);
        const double sgn = (face % 2 == 0) ? h : -h;
        switch (face / 2) {
          case 0: put(i, sgn, a, b); break;
          case 1: put(i, a, sgn, b); break;
          default: put(i, a, b, sgn); break;
        }
      }
      break;
    }
    case SyntheticShape::plane: {
      const double h = 0.5 * prm.at("side");
      for (std::size_t i = 0; i < n; ++i) put(i, rng.uniform(-h, h), rng.uniform(-h, h), 0.0);
      break;
    }
    case SyntheticShape::z_curve: {
      const auto c = z_corners(prm.at("side"));
      const std::array<double, 3> len{std::hypot(c[1][0] - c[0][0], c[1][1] - c[0][1]),
                                      std::hypot(c[2][0] - c[1][0], c[2][1] - c[1][1]),
                                      std::hypot(c[3][0] - c[2][0], c[3][1] - c[2][1])};
      const double total = len[0] + len[1] + len[2];
      for (std::size_t i = 0; i < n; ++i) {
        double t = rng.uniform() * total;
        std::size_t seg = 0;
        while (seg < 2 && t > len[seg]) t -= len[seg++];
        const double f = std::min(t / len[seg], 1.0);
        put(i, c[seg][0] + f * (c[seg + 1][0] - c[seg][0]), c[seg][1] + f * (c[seg + 1][1] - c[seg][1]),
            0.0);
      }
      break;
    }
    case SyntheticShape::double_torus: {
      // Surface of the union of two overlapping solid tori centred at x = -d and x = +d.
      const double big_r = prm.at("R"), small_r = prm.at("r"), d = prm.at("d");
      std::size_t i = 0;
      while (i < n) {
        const bool left = rng.uniform() < 0.5;
        const double cx = left ? -d : d;
        const auto p = torus_point(rng, big_r, small_r, cx);
        if (torus_distance(p, big_r, small_r, -cx) < 0.0) continue;
        put(i++, p[0], p[1], p[2]);
      }
      break;
    }
  }
  return PointCloud(std::move(pts));
}

double shape_residual(SyntheticShape shape, const ShapeParams& given, std::span<const double> p) {
  const ShapeParams prm = resolve(shape, given);
  switch (shape) {
    case SyntheticShape::sphere: return std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) - prm.at("radius");
    case SyntheticShape::torus: return torus_distance(p, prm.at("R"), prm.at("r"), 0.0);
    case SyntheticShape::cube_surface:
      return std::max({std::abs(p[0]), std::abs(p[1]), std::abs(p[2])}) - 0.5 * prm.at("side");
    case SyntheticShape::plane: return p[2];
    case SyntheticShape::z_curve: {
      const auto c = z_corners(prm.at("side"));
      const double planar = std::min({segment_distance(p[0], p[1], c[0], c[1]),
                                      segment_distance(p[0], p[1], c[1], c[2]),
                                      segment_distance(p[0], p[1], c[2], c[3])});
      return std::hypot(planar, p[2]);
    }
    case SyntheticShape::double_torus: {
      const double d = prm.at("d");
      const double a = torus_distance(p, prm.at("R"), prm.at("r"), -d);
      const double b = torus_distance(p, prm.at("R"), prm.at("r"), d);
      return std::abs(a) < std::abs(b) ? a : b;
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace foldgraph
