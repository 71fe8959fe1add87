#include "foldgraph/graph_signal.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

#include "foldgraph/errors.hpp"
#include "foldgraph/pointcloud.hpp"
#include "foldgraph/rng.hpp"

namespace foldgraph {

namespace {

void require_square(const Matrix& a, const char* what) {
  if (a.rows() != a.cols()) {
    throw DimensionError(std::string(what) + ": expected a square matrix, got " + a.shape_string());
  }
}

void require_rows(const Matrix& a, const Matrix& x, const char* what) {
  require_square(a, what);
  if (x.rows() != a.rows()) {
    throw DimensionError(std::string(what) + ": graph " + a.shape_string() + " vs signal " +
                         x.shape_string());
  }
}

void require_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw DomainError("alpha must lie in [0, 1], got " + format_double(alpha));
  }
}

void require_mu(double mu) {
  if (!(mu > 0.0)) throw DomainError("mu must be positive, got " + format_double(mu));
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<double> mat_vec(const Matrix& a, std::span<const double> x) {
  std::vector<double> y(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) y[i] = dot(a.row(i), x);
  return y;
}

double offdiag_norm(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (i != j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

}  // namespace

Lattice2D::Lattice2D(std::size_t side) : side_(side), nodes_(side * side, 2) {
  if (side == 0) throw DomainError("lattice side must be at least 1");
  const double s = static_cast<double>(side);
  for (std::size_t r = 0; r < side; ++r) {
    for (std::size_t c = 0; c < side; ++c) {
      nodes_(r * side + c, 0) = (static_cast<double>(c) + 0.5) / s;
      nodes_(r * side + c, 1) = (static_cast<double>(r) + 0.5) / s;
    }
  }
}

std::vector<std::size_t> lattice_neighbors(const Lattice2D& lat, std::size_t i, std::size_t k) {
  const std::size_t m = lat.size();
  if (i >= m) throw DomainError("node " + std::to_string(i) + " outside lattice of " + std::to_string(m));
  if (k == 0 || k >= m) {
    throw DomainError("k must satisfy 1 <= k < M (k = " + std::to_string(k) + ", M = " +
                      std::to_string(m) + ")");
  }
  // Squared distances in grid units are exact integers, so equidistant nodes
  // compare equal and fall back to index order.
  const auto side = static_cast<long long>(lat.side());
  const long long ri = static_cast<long long>(i) / side, ci = static_cast<long long>(i) % side;
  std::vector<std::pair<long long, std::size_t>> cand;
  cand.reserve(m - 1);
  for (std::size_t j = 0; j < m; ++j) {
    if (j == i) continue;
    const long long dr = static_cast<long long>(j) / side - ri;
    const long long dc = static_cast<long long>(j) % side - ci;
    cand.emplace_back(dr * dr + dc * dc, j);
  }
  std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
  std::vector<std::size_t> out(k);
  for (std::size_t t = 0; t < k; ++t) out[t] = cand[t].second;
  return out;
}

Matrix build_initial_adjacency(const Lattice2D& lat, std::size_t k, double sigma) {
  if (!(sigma > 0.0)) throw DomainError("sigma must be positive, got " + format_double(sigma));
  const std::size_t m = lat.size();
  Matrix a(m, m, 0.0);
  const Matrix& z = lat.nodes();
  const double two_s2 = 2.0 * sigma * sigma;
  for (std::size_t i = 0; i < m; ++i) {
    const auto nbrs = lattice_neighbors(lat, i, k);
    std::vector<double> d2(k);
    for (std::size_t t = 0; t < k; ++t) {
      const double dx = z(i, 0) - z(nbrs[t], 0);
      const double dy = z(i, 1) - z(nbrs[t], 1);
      d2[t] = dx * dx + dy * dy;
    }
    // Shifting by the nearest distance cancels in the normalization and keeps
    // the weights away from underflow for small sigma.
    const double d2_min = *std::min_element(d2.begin(), d2.end());
    double total = 0.0;
    for (std::size_t t = 0; t < k; ++t) {
      d2[t] = std::exp(-(d2[t] - d2_min) / two_s2);
      total += d2[t];
    }
    for (std::size_t t = 0; t < k; ++t) a(i, nbrs[t]) = d2[t] / total;
  }
  return a;
}

Matrix haar_filter(const Matrix& a, const Matrix& x) {
  require_rows(a, x, "haar_filter");
  Matrix y = matmul(a, x);
  for (std::size_t t = 0; t < y.size(); ++t) y.data()[t] = (x.data()[t] + y.data()[t]) * 0.5;
  return y;
}

Matrix alpha_filter_adjacency(const Matrix& a, const Matrix& x, double alpha) {
  require_alpha(alpha);
  if (alpha == 0.5) return haar_filter(a, x);
  require_rows(a, x, "alpha_filter_adjacency");
  Matrix y = matmul(a, x);
  const double keep = 1.0 - alpha;
  for (std::size_t t = 0; t < y.size(); ++t) y.data()[t] = keep * x.data()[t] + alpha * y.data()[t];
  return y;
}

Matrix laplacian_filter(const Matrix& a, const Matrix& x, double mu) {
  require_mu(mu);
  require_rows(a, x, "laplacian_filter");
  Matrix sys = laplacian_matrix(a);
  for (std::size_t i = 0; i < sys.rows(); ++i) sys(i, i) += mu;
  return Cholesky(sys).solve(x);
}

Matrix alpha_filter_laplacian(const Matrix& a, const Matrix& x, double mu, double alpha) {
  require_alpha(alpha);
  require_mu(mu);
  require_rows(a, x, "alpha_filter_laplacian");
  const LaplacianSpectrum spec = eig_symmetric(laplacian_matrix(a));
  const Matrix& v = spec.eigenvectors;
  Matrix coeff = matmul(transpose(v), x);
  for (std::size_t i = 0; i < coeff.rows(); ++i) {
    const double g = std::pow(mu + spec.eigenvalues[i], -2.0 * alpha);
    for (double& c : coeff.row(i)) c *= g;
  }
  return matmul(v, coeff);
}

LaplacianSpectrum eig_symmetric(const Matrix& m) {
  require_square(m, "eig_symmetric");
  const double defect = symmetry_defect(m);
  if (defect >= 1e-8 * std::max(1.0, max_abs(m))) {
    throw DomainError("eig_symmetric: matrix is not symmetric (defect " + format_double(defect) + ")");
  }
  const std::size_t n = m.rows();
  Matrix a = symmetrize(m);
  Matrix v = Matrix::identity(n);
  const double tol = 1e-12 * frobenius_norm(m);

  bool converged = offdiag_norm(a) <= tol;
  for (int sweep = 0; sweep < 100 && !converged; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double app = a(p, p), aqq = a(q, q);
        const double theta = (aqq - app) / (2.0 * apq);
        double t = std::abs(theta) > 1e150 ? 0.5 / std::abs(theta)
                                           : 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        if (theta < 0.0) t = -t;
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          if (k == p || k == q) continue;
          const double akp = a(k, p), akq = a(k, q);
          const double nkp = c * akp - s * akq;
          const double nkq = s * akp + c * akq;
          a(k, p) = nkp;
          a(p, k) = nkp;
          a(k, q) = nkq;
          a(q, k) = nkq;
        }
        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
    converged = offdiag_norm(a) <= tol;
  }
  if (!converged) {
    throw NumericalError("eig_symmetric: no convergence after 100 sweeps (off-diagonal norm " +
                         format_double(offdiag_norm(a)) + ")");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a(x, x) < a(y, y); });

  LaplacianSpectrum out{std::vector<double>(n), Matrix(n, n)};
  for (std::size_t col = 0; col < n; ++col) {
    const std::size_t src = order[col];
    out.eigenvalues[col] = a(src, src);
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) sum += v(k, src);
    const double sign = sum < 0.0 ? -1.0 : 1.0;
    for (std::size_t k = 0; k < n; ++k) out.eigenvectors(k, col) = sign * v(k, src);
  }
  return out;
}

double reconstruction_residual(const Matrix& m, const LaplacianSpectrum& spec) {
  const Matrix& v = spec.eigenvectors;
  Matrix vs = v;
  for (std::size_t i = 0; i < vs.rows(); ++i)
    for (std::size_t j = 0; j < vs.cols(); ++j) vs(i, j) *= spec.eigenvalues[j];
  const Matrix rec = matmul(vs, transpose(v));
  const double denom = frobenius_norm(m);
  const double num = frobenius_norm(add(m, scaled(rec, -1.0)));
  return denom == 0.0 ? num : num / denom;
}

double orthogonality_defect(const LaplacianSpectrum& spec) {
  const Matrix g = matmul(transpose(spec.eigenvectors), spec.eigenvectors);
  double worst = 0.0;
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = 0; j < g.cols(); ++j)
      worst = std::max(worst, std::abs(g(i, j) - (i == j ? 1.0 : 0.0)));
  return worst;
}

double spectral_radius(const Matrix& a) {
  require_square(a, "spectral_radius");
  const std::size_t n = a.rows();
  if (n == 0) return 0.0;
  Rng rng(0x5eed5eedULL);
  std::vector<double> v(n);
  for (double& e : v) e = rng.uniform(0.5, 1.5);
  double norm = std::sqrt(dot(v, v));
  for (double& e : v) e /= norm;

  double estimate = 0.0;
  for (int it = 0; it < 1000; ++it) {
    std::vector<double> w = mat_vec(a, v);
    norm = std::sqrt(dot(w, w));
    if (norm == 0.0) return 0.0;
    const double prev = estimate;
    estimate = norm;
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / norm;
    if (it > 0 && std::abs(estimate - prev) < 1e-12 * estimate) break;
  }
  return estimate;
}

double graph_tv(const Matrix& a, std::span<const double> x, double radius) {
  require_square(a, "graph_tv");
  if (x.size() != a.rows()) {
    throw DimensionError("graph_tv: graph " + a.shape_string() + " vs signal of length " +
                         std::to_string(x.size()));
  }
  if (radius == 0.0) return dot(x, x);
  const std::vector<double> ax = mat_vec(a, x);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - ax[i] / radius;
    s += d * d;
  }
  return s;
}

double graph_tv(const Matrix& a, std::span<const double> x) {
  return graph_tv(a, x, spectral_radius(a));
}

double quadratic_variation(const Matrix& lap, std::span<const double> x) {
  require_square(lap, "quadratic_variation");
  if (x.size() != lap.rows()) {
    throw DimensionError("quadratic_variation: Laplacian " + lap.shape_string() +
                         " vs signal of length " + std::to_string(x.size()));
  }
  return dot(x, mat_vec(lap, x));
}

void validate_lattice_signal(const Matrix& grid) {
  for (std::size_t t = 0; t < grid.size(); ++t) {
    const double e = grid.data()[t];
    if (e != 0.0 && e != 1.0) {
      throw DomainError("lattice signal entries must be 0 or 1, found " + format_double(e));
    }
  }
}

double dtv_at(const Matrix& grid, std::ptrdiff_t i, std::ptrdiff_t j) {
  const auto rows = static_cast<std::ptrdiff_t>(grid.rows());
  const auto cols = static_cast<std::ptrdiff_t>(grid.cols());
  auto at = [&](std::ptrdiff_t r, std::ptrdiff_t c) {
    return (r < 0 || c < 0 || r >= rows || c >= cols) ? 0.0
                                                      : grid(static_cast<std::size_t>(r),
                                                             static_cast<std::size_t>(c));
  };
  const double self = at(i, j);
  if (self == 0.0) return 0.0;
  double neighbours = 0.0, variation = 0.0;
  for (const std::ptrdiff_t di : {-1, 1}) {
    for (const std::ptrdiff_t dj : {-1, 1}) {
      neighbours += at(i + di, j + dj);
      variation += std::abs(at(i + di, j + dj) - at(i - di, j - dj));
    }
  }
  return self * ((neighbours == 0.0 ? 1.0 : 0.0) + variation);
}

double dtv(const Matrix& grid) {
  validate_lattice_signal(grid);
  double total = 0.0;
  for (std::size_t i = 0; i < grid.rows(); ++i)
    for (std::size_t j = 0; j < grid.cols(); ++j)
      total += dtv_at(grid, static_cast<std::ptrdiff_t>(i), static_cast<std::ptrdiff_t>(j));
  return total;
}

bool equivalence_check(const Matrix& grid, std::span<const double> x1, std::span<const double> x2) {
  validate_lattice_signal(grid);
  if (x1.size() != x2.size()) {
    throw DimensionError("equivalence_check: signals of length " + std::to_string(x1.size()) +
                         " and " + std::to_string(x2.size()));
  }
  double ones = 0.0;
  for (std::size_t t = 0; t < grid.size(); ++t) ones += grid.data()[t];
  if (ones != static_cast<double>(x1.size())) return false;
  for (std::size_t l = 0; l < x1.size(); ++l) {
    const double r = std::ceil(x1[l]), c = std::ceil(x2[l]);
    if (!(r >= 1.0 && c >= 1.0 && r <= static_cast<double>(grid.rows()) &&
          c <= static_cast<double>(grid.cols()))) {
      return false;
    }
    if (grid(static_cast<std::size_t>(r) - 1, static_cast<std::size_t>(c) - 1) != 1.0) return false;
  }
  return true;
}

void write_spectrum(const std::filesystem::path& path, const std::vector<double>& eigenvalues) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  for (const double l : eigenvalues) out << format_double(l) << '\n';
  out.flush();
  if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

}  // namespace foldgraph
