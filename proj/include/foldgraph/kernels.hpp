#pragma once

// Data-parallel inner loops behind every dense operation in the library.
//
// Each kernel has a scalar reference implementation and, where the target
// supports it, an AVX2 (x86-64) or NEON (AArch64) variant. The variants
// perform the same IEEE operations in the same per-element order, with no
// FMA contraction, so every variant is bitwise-identical to the scalar
// reference. The active variant is picked once at startup from CPUID and can
// be overridden with FOLDGRAPH_ISA=scalar|avx2|neon or set_active_isa().

#include <cstddef>
#include <string_view>

namespace foldgraph::kernels {

enum class Isa { scalar, avx2, neon };

std::string_view isa_name(Isa isa) noexcept;

struct AdamCoeffs {
  double lr;
  double beta1;
  double beta2;
  double eps;
  double bias_correction1;  // 1 - beta1^t
  double bias_correction2;  // 1 - beta2^t
};

struct KernelTable {
  // c[m x n] += a[m x k] * b[k x n], all row-major and densely packed.
  // Each c(i,j) accumulates its k products in ascending k order.
  void (*gemm_acc)(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b,
                   double* c);
  // out[j] = (px - xs[j])^2 + (py - ys[j])^2 + (pz - zs[j])^2
  void (*sq_dist_row)(double px, double py, double pz, const double* xs, const double* ys,
                      const double* zs, std::size_t n, double* out);
  // y += alpha * x
  void (*axpy)(std::size_t n, double alpha, const double* x, double* y);
  // y = (x > 0) ? x : +0. NaN and -0 both map to +0.
  void (*relu)(std::size_t n, const double* x, double* y);
  // Bias-corrected Adam update of n parameters in index order.
  void (*adam_update)(std::size_t n, const AdamCoeffs& coeffs, const double* grad, double* m,
                      double* v, double* param);
};

bool isa_available(Isa isa) noexcept;
const KernelTable& table(Isa isa);

Isa active_isa() noexcept;
/// Throws DomainError when `isa` is not available on this machine.
void set_active_isa(Isa isa);
const KernelTable& active() noexcept;

inline void gemm_acc(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b,
                     double* c) {
  active().gemm_acc(m, k, n, a, b, c);
}
inline void sq_dist_row(double px, double py, double pz, const double* xs, const double* ys,
                        const double* zs, std::size_t n, double* out) {
  active().sq_dist_row(px, py, pz, xs, ys, zs, n, out);
}
inline void axpy(std::size_t n, double alpha, const double* x, double* y) {
  active().axpy(n, alpha, x, y);
}
inline void relu(std::size_t n, const double* x, double* y) { active().relu(n, x, y); }
inline void adam_update(std::size_t n, const AdamCoeffs& coeffs, const double* grad, double* m,
                        double* v, double* param) {
  active().adam_update(n, coeffs, grad, m, v, param);
}

namespace detail {
const KernelTable& scalar_table() noexcept;
#if defined(FOLDGRAPH_HAVE_AVX2)
const KernelTable& avx2_table() noexcept;
#endif
#if defined(FOLDGRAPH_HAVE_NEON)
const KernelTable& neon_table() noexcept;
#endif
}  // namespace detail

}  // namespace foldgraph::kernels
