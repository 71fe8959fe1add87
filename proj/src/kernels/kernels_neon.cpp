// NEON variants for AArch64. Same operation order as the scalar reference;
// relies on -ffp-contract=off so vmulq/vaddq pairs are never fused.

#include <arm_neon.h>

#include <cmath>

#include "foldgraph/kernels.hpp"

namespace foldgraph::kernels {
namespace {

void gemm_acc_neon(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b,
                   double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
      float64x2_t acc0 = vld1q_f64(crow + j);
      float64x2_t acc1 = vld1q_f64(crow + j + 2);
      for (std::size_t p = 0; p < k; ++p) {
        const float64x2_t av = vdupq_n_f64(arow[p]);
        acc0 = vaddq_f64(acc0, vmulq_f64(av, vld1q_f64(b + p * n + j)));
        acc1 = vaddq_f64(acc1, vmulq_f64(av, vld1q_f64(b + p * n + j + 2)));
      }
      vst1q_f64(crow + j, acc0);
      vst1q_f64(crow + j + 2, acc1);
    }
    for (; j < n; ++j) {
      double acc = crow[j];
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * b[p * n + j];
      crow[j] = acc;
    }
  }
}

void sq_dist_row_neon(double px, double py, double pz, const double* xs, const double* ys,
                      const double* zs, std::size_t n, double* out) {
  const float64x2_t vx = vdupq_n_f64(px);
  const float64x2_t vy = vdupq_n_f64(py);
  const float64x2_t vz = vdupq_n_f64(pz);
  std::size_t j = 0;
  for (; j + 2 <= n; j += 2) {
    const float64x2_t dx = vsubq_f64(vx, vld1q_f64(xs + j));
    const float64x2_t dy = vsubq_f64(vy, vld1q_f64(ys + j));
    const float64x2_t dz = vsubq_f64(vz, vld1q_f64(zs + j));
    const float64x2_t xy = vaddq_f64(vmulq_f64(dx, dx), vmulq_f64(dy, dy));
    vst1q_f64(out + j, vaddq_f64(xy, vmulq_f64(dz, dz)));
  }
  for (; j < n; ++j) {
    const double dx = px - xs[j];
    const double dy = py - ys[j];
    const double dz = pz - zs[j];
    out[j] = (dx * dx + dy * dy) + dz * dz;
  }
}

void axpy_neon(std::size_t n, double alpha, const double* x, double* y) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vmulq_f64(va, vld1q_f64(x + i))));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void relu_neon(std::size_t n, const double* x, double* y) {
  const float64x2_t zero = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t xv = vld1q_f64(x + i);
    vst1q_f64(y + i, vbslq_f64(vcgtq_f64(xv, zero), xv, zero));
  }
  for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void adam_update_neon(std::size_t n, const AdamCoeffs& c, const double* grad, double* m, double* v,
                      double* param) {
  const double one_minus_b1 = 1.0 - c.beta1;
  const double one_minus_b2 = 1.0 - c.beta2;
  const float64x2_t b1 = vdupq_n_f64(c.beta1);
  const float64x2_t b2 = vdupq_n_f64(c.beta2);
  const float64x2_t omb1 = vdupq_n_f64(one_minus_b1);
  const float64x2_t omb2 = vdupq_n_f64(one_minus_b2);
  const float64x2_t bc1 = vdupq_n_f64(c.bias_correction1);
  const float64x2_t bc2 = vdupq_n_f64(c.bias_correction2);
  const float64x2_t lr = vdupq_n_f64(c.lr);
  const float64x2_t eps = vdupq_n_f64(c.eps);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t g = vld1q_f64(grad + i);
    const float64x2_t mi = vaddq_f64(vmulq_f64(b1, vld1q_f64(m + i)), vmulq_f64(omb1, g));
    const float64x2_t vi =
        vaddq_f64(vmulq_f64(b2, vld1q_f64(v + i)), vmulq_f64(omb2, vmulq_f64(g, g)));
    vst1q_f64(m + i, mi);
    vst1q_f64(v + i, vi);
    const float64x2_t mhat = vdivq_f64(mi, bc1);
    const float64x2_t vhat = vdivq_f64(vi, bc2);
    const float64x2_t step = vdivq_f64(vmulq_f64(lr, mhat), vaddq_f64(vsqrtq_f64(vhat), eps));
    vst1q_f64(param + i, vsubq_f64(vld1q_f64(param + i), step));
  }
  for (; i < n; ++i) {
    const double g = grad[i];
    m[i] = c.beta1 * m[i] + one_minus_b1 * g;
    v[i] = c.beta2 * v[i] + one_minus_b2 * (g * g);
    const double mhat = m[i] / c.bias_correction1;
    const double vhat = v[i] / c.bias_correction2;
    param[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
  }
}

constexpr KernelTable kNeon{
    &gemm_acc_neon, &sq_dist_row_neon, &axpy_neon, &relu_neon, &adam_update_neon,
};

}  // namespace

namespace detail {
const KernelTable& neon_table() noexcept { return kNeon; }
}  // namespace detail

}  // namespace foldgraph::kernels
