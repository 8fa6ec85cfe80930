#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "deepcontext/kernels.hpp"

namespace deepcontext::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa detect() {
  const bool has_avx2 = cpu_has_avx2();
  if (const char* env = std::getenv("DEEPCONTEXT_ISA")) {
    const std::string want(env);
    if (want == "scalar") return Isa::scalar;
    if (want == "avx2" && has_avx2) return Isa::avx2;
  }
  return has_avx2 ? Isa::avx2 : Isa::scalar;
}

std::atomic<int>& selected() {
  static std::atomic<int> isa{static_cast<int>(detect())};
  return isa;
}

bool use_avx2() { return selected().load(std::memory_order_relaxed) == static_cast<int>(Isa::avx2); }

}  // namespace

Isa active_isa() { return static_cast<Isa>(selected().load()); }

bool isa_supported(Isa isa) { return isa == Isa::scalar || cpu_has_avx2(); }

void force_isa(Isa isa) {
  if (!isa_supported(isa))
    throw std::runtime_error("ISA not supported on this CPU: " + std::string(isa_name(isa)));
  selected().store(static_cast<int>(isa));
}

std::string_view isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

void gemm(bool trans_a, bool trans_b, int m, int n, int k, const float* a,
          int lda, const float* b, int ldb, float beta, float* c, int ldc) {
  if (use_avx2())
    avx2::gemm(trans_a, trans_b, m, n, k, a, lda, b, ldb, beta, c, ldc);
  else
    scalar::gemm(trans_a, trans_b, m, n, k, a, lda, b, ldb, beta, c, ldc);
}

void gemm(bool trans_a, bool trans_b, int m, int n, int k, const double* a,
          int lda, const double* b, int ldb, double beta, double* c, int ldc) {
  if (use_avx2())
    avx2::gemm(trans_a, trans_b, m, n, k, a, lda, b, ldb, beta, c, ldc);
  else
    scalar::gemm(trans_a, trans_b, m, n, k, a, lda, b, ldb, beta, c, ldc);
}

double min_sqdist(const double* xs, const double* ys, const double* zs,
                  std::size_t n, double px, double py, double pz) {
  return use_avx2() ? avx2::min_sqdist(xs, ys, zs, n, px, py, pz)
                    : scalar::min_sqdist(xs, ys, zs, n, px, py, pz);
}

}  // namespace deepcontext::kernels
