#include <cmath>

#include "foldgraph/kernels.hpp"

namespace foldgraph::kernels {
namespace {

void gemm_acc_scalar(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b,
                     double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = arow[p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) {
        crow[j] += aip * brow[j];
      }
    }
  }
}

void sq_dist_row_scalar(double px, double py, double pz, const double* xs, const double* ys,
                        const double* zs, std::size_t n, double* out) {
  for (std::size_t j = 0; j < n; ++j) {
    const double dx = px - xs[j];
    const double dy = py - ys[j];
    const double dz = pz - zs[j];
    out[j] = (dx * dx + dy * dy) + dz * dz;
  }
}

void axpy_scalar(std::size_t n, double alpha, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void relu_scalar(std::size_t n, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void adam_update_scalar(std::size_t n, const AdamCoeffs& c, const double* grad, double* m,
                        double* v, double* param) {
  const double one_minus_b1 = 1.0 - c.beta1;
  const double one_minus_b2 = 1.0 - c.beta2;
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grad[i];
    m[i] = c.beta1 * m[i] + one_minus_b1 * g;
    v[i] = c.beta2 * v[i] + one_minus_b2 * (g * g);
    const double mhat = m[i] / c.bias_correction1;
    const double vhat = v[i] / c.bias_correction2;
    param[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
  }
}

constexpr KernelTable kScalar{
    &gemm_acc_scalar, &sq_dist_row_scalar, &axpy_scalar, &relu_scalar, &adam_update_scalar,
};

}  // namespace

namespace detail {
const KernelTable& scalar_table() noexcept { return kScalar; }
}  // namespace detail

}  // namespace foldgraph::kernels
