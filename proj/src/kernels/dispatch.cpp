#include <atomic>
#include <cstdlib>
#include <string>
#include <string_view>

#include "foldgraph/errors.hpp"
#include "foldgraph/kernels.hpp"

namespace foldgraph::kernels {
namespace {

bool cpu_has_avx2() noexcept {
#if defined(FOLDGRAPH_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

Isa detect() noexcept {
  if (const char* env = std::getenv("FOLDGRAPH_ISA")) {
    const std::string_view want(env);
    if (want == "scalar") return Isa::scalar;
    if (want == "avx2" && isa_available(Isa::avx2)) return Isa::avx2;
    if (want == "neon" && isa_available(Isa::neon)) return Isa::neon;
  }
  if (isa_available(Isa::avx2)) return Isa::avx2;
  if (isa_available(Isa::neon)) return Isa::neon;
  return Isa::scalar;
}

std::atomic<Isa>& current() noexcept {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) noexcept {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    case Isa::neon: return "neon";
  }
  return "unknown";
}

bool isa_available(Isa isa) noexcept {
  switch (isa) {
    case Isa::scalar: return true;
    case Isa::avx2: return cpu_has_avx2();
    case Isa::neon:
#if defined(FOLDGRAPH_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& table(Isa isa) {
  if (!isa_available(isa)) {
    throw DomainError("kernel variant '" + std::string(isa_name(isa)) + "' is not available");
  }
  switch (isa) {
#if defined(FOLDGRAPH_HAVE_AVX2)
    case Isa::avx2: return detail::avx2_table();
#endif
#if defined(FOLDGRAPH_HAVE_NEON)
    case Isa::neon: return detail::neon_table();
#endif
    default: return detail::scalar_table();
  }
}

Isa active_isa() noexcept { return current().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
  table(isa);
  current().store(isa, std::memory_order_relaxed);
}

const KernelTable& active() noexcept {
  switch (active_isa()) {
#if defined(FOLDGRAPH_HAVE_AVX2)
    case Isa::avx2: return detail::avx2_table();
#endif
#if defined(FOLDGRAPH_HAVE_NEON)
    case Isa::neon: return detail::neon_table();
#endif
    default: return detail::scalar_table();
  }
}

}  // namespace foldgraph::kernels
