#pragma once
// Data-parallel inner loops shared by the convolution engine and the shape
// matcher. Every routine has a scalar reference version and an AVX2/FMA
// version; the dispatcher picks one at runtime.

#include <cstddef>
#include <string_view>

namespace deepcontext::kernels {

enum class Isa { scalar, avx2 };

// ISA selected for this process. Honors DEEPCONTEXT_ISA=scalar|avx2 and
// falls back to scalar when the CPU lacks AVX2+FMA.
Isa active_isa();
bool isa_supported(Isa isa);
// Test hook: pins the dispatcher to one implementation. Throws if the CPU
// cannot run it.
void force_isa(Isa isa);
std::string_view isa_name(Isa isa);

// Row-major C[m,n] = beta * C + op(A)[m,k] * op(B)[k,n].
// beta must be 0 or 1 (the only values the engine needs).
void gemm(bool trans_a, bool trans_b, int m, int n, int k, const float* a,
          int lda, const float* b, int ldb, float beta, float* c, int ldc);
void gemm(bool trans_a, bool trans_b, int m, int n, int k, const double* a,
          int lda, const double* b, int ldb, double beta, double* c, int ldc);

// Smallest squared Euclidean distance from (px,py,pz) to n points stored as
// structure-of-arrays. Both variants evaluate ((dx*dx + dy*dy) + dz*dz)
// without contraction, so results are bit-identical across ISAs.
double min_sqdist(const double* xs, const double* ys, const double* zs,
                  std::size_t n, double px, double py, double pz);

// Explicit per-ISA entry points, used by the equivalence tests.
namespace scalar {
void gemm(bool trans_a, bool trans_b, int m, int n, int k, const float* a,
          int lda, const float* b, int ldb, float beta, float* c, int ldc);
void gemm(bool trans_a, bool trans_b, int m, int n, int k, const double* a,
          int lda, const double* b, int ldb, double beta, double* c, int ldc);
double min_sqdist(const double* xs, const double* ys, const double* zs,
                  std::size_t n, double px, double py, double pz);
}  // namespace scalar

namespace avx2 {
void gemm(bool trans_a, bool trans_b, int m, int n, int k, const float* a,
          int lda, const float* b, int ldb, float beta, float* c, int ldc);
void gemm(bool trans_a, bool trans_b, int m, int n, int k, const double* a,
          int lda, const double* b, int ldb, double beta, double* c, int ldc);
double min_sqdist(const double* xs, const double* ys, const double* zs,
                  std::size_t n, double px, double py, double pz);
}  // namespace avx2

}  // namespace deepcontext::kernels
