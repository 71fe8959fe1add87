// AVX2 variants. Compiled with -mavx2 only (no -mfma): every multiply and add
// rounds separately, matching the scalar reference bit for bit.

#include <immintrin.h>

#include <cmath>

#include "foldgraph/kernels.hpp"

namespace foldgraph::kernels {
namespace {

// Accumulates a rows x 8 tile of c in registers while sweeping k.
template <std::size_t Rows>
inline void gemm_tile8(std::size_t k, std::size_t n, const double* a, std::size_t lda,
                       const double* b, double* c) {
  __m256d lo[Rows];
  __m256d hi[Rows];
  for (std::size_t r = 0; r < Rows; ++r) {
    lo[r] = _mm256_loadu_pd(c + r * n);
    hi[r] = _mm256_loadu_pd(c + r * n + 4);
  }
  for (std::size_t p = 0; p < k; ++p) {
    const __m256d b0 = _mm256_loadu_pd(b + p * n);
    const __m256d b1 = _mm256_loadu_pd(b + p * n + 4);
    for (std::size_t r = 0; r < Rows; ++r) {
      const __m256d av = _mm256_broadcast_sd(a + r * lda + p);
      lo[r] = _mm256_add_pd(lo[r], _mm256_mul_pd(av, b0));
      hi[r] = _mm256_add_pd(hi[r], _mm256_mul_pd(av, b1));
    }
  }
  for (std::size_t r = 0; r < Rows; ++r) {
    _mm256_storeu_pd(c + r * n, lo[r]);
    _mm256_storeu_pd(c + r * n + 4, hi[r]);
  }
}

template <std::size_t Rows>
inline void gemm_tile4(std::size_t k, std::size_t n, const double* a, std::size_t lda,
                       const double* b, double* c) {
  __m256d acc[Rows];
  for (std::size_t r = 0; r < Rows; ++r) acc[r] = _mm256_loadu_pd(c + r * n);
  for (std::size_t p = 0; p < k; ++p) {
    const __m256d bv = _mm256_loadu_pd(b + p * n);
    for (std::size_t r = 0; r < Rows; ++r) {
      acc[r] = _mm256_add_pd(acc[r], _mm256_mul_pd(_mm256_broadcast_sd(a + r * lda + p), bv));
    }
  }
  for (std::size_t r = 0; r < Rows; ++r) _mm256_storeu_pd(c + r * n, acc[r]);
}

template <std::size_t Rows>
inline void gemm_rows(std::size_t k, std::size_t n, const double* a, const double* b, double* c) {
  std::size_t j = 0;
  for (; j + 8 <= n; j += 8) gemm_tile8<Rows>(k, n, a, k, b + j, c + j);
  for (; j + 4 <= n; j += 4) gemm_tile4<Rows>(k, n, a, k, b + j, c + j);
  for (; j < n; ++j) {
    for (std::size_t r = 0; r < Rows; ++r) {
      double acc = c[r * n + j];
      for (std::size_t p = 0; p < k; ++p) acc += a[r * k + p] * b[p * n + j];
      c[r * n + j] = acc;
    }
  }
}

void gemm_acc_avx2(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b,
                   double* c) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) gemm_rows<4>(k, n, a + i * k, b, c + i * n);
  for (; i < m; ++i) gemm_rows<1>(k, n, a + i * k, b, c + i * n);
}

void sq_dist_row_avx2(double px, double py, double pz, const double* xs, const double* ys,
                      const double* zs, std::size_t n, double* out) {
  const __m256d vx = _mm256_set1_pd(px);
  const __m256d vy = _mm256_set1_pd(py);
  const __m256d vz = _mm256_set1_pd(pz);
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    const __m256d dx = _mm256_sub_pd(vx, _mm256_loadu_pd(xs + j));
    const __m256d dy = _mm256_sub_pd(vy, _mm256_loadu_pd(ys + j));
    const __m256d dz = _mm256_sub_pd(vz, _mm256_loadu_pd(zs + j));
    const __m256d xy = _mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy));
    _mm256_storeu_pd(out + j, _mm256_add_pd(xy, _mm256_mul_pd(dz, dz)));
  }
  for (; j < n; ++j) {
    const double dx = px - xs[j];
    const double dy = py - ys[j];
    const double dz = pz - zs[j];
    out[j] = (dx * dx + dy * dy) + dz * dz;
  }
}

void axpy_avx2(std::size_t n, double alpha, const double* x, double* y) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void relu_avx2(std::size_t n, const double* x, double* y) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  // maxpd returns its second operand when either input is NaN or both are zero.
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(y + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
  for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void adam_update_avx2(std::size_t n, const AdamCoeffs& c, const double* grad, double* m, double* v,
                      double* param) {
  const double one_minus_b1 = 1.0 - c.beta1;
  const double one_minus_b2 = 1.0 - c.beta2;
  const __m256d b1 = _mm256_set1_pd(c.beta1);
  const __m256d b2 = _mm256_set1_pd(c.beta2);
  const __m256d omb1 = _mm256_set1_pd(one_minus_b1);
  const __m256d omb2 = _mm256_set1_pd(one_minus_b2);
  const __m256d bc1 = _mm256_set1_pd(c.bias_correction1);
  const __m256d bc2 = _mm256_set1_pd(c.bias_correction2);
  const __m256d lr = _mm256_set1_pd(c.lr);
  const __m256d eps = _mm256_set1_pd(c.eps);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d g = _mm256_loadu_pd(grad + i);
    const __m256d mi =
        _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + i)), _mm256_mul_pd(omb1, g));
    const __m256d vi = _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v + i)),
                                     _mm256_mul_pd(omb2, _mm256_mul_pd(g, g)));
    _mm256_storeu_pd(m + i, mi);
    _mm256_storeu_pd(v + i, vi);
    const __m256d mhat = _mm256_div_pd(mi, bc1);
    const __m256d vhat = _mm256_div_pd(vi, bc2);
    const __m256d step =
        _mm256_div_pd(_mm256_mul_pd(lr, mhat), _mm256_add_pd(_mm256_sqrt_pd(vhat), eps));
    _mm256_storeu_pd(param + i, _mm256_sub_pd(_mm256_loadu_pd(param + i), step));
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

constexpr KernelTable kAvx2{
    &gemm_acc_avx2, &sq_dist_row_avx2, &axpy_avx2, &relu_avx2, &adam_update_avx2,
};

}  // namespace

namespace detail {
const KernelTable& avx2_table() noexcept { return kAvx2; }
}  // namespace detail

}  // namespace foldgraph::kernels
