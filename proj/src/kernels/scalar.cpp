#include "deepcontext/kernels.hpp"

#include <limits>

namespace deepcontext::kernels::scalar {
namespace {

template <class T>
void gemm_impl(bool trans_a, bool trans_b, int m, int n, int k, const T* a,
               int lda, const T* b, int ldb, T beta, T* c, int ldc) {
  for (int i = 0; i < m; ++i) {
    T* crow = c + static_cast<std::ptrdiff_t>(i) * ldc;
    if (beta == T(0)) {
      for (int j = 0; j < n; ++j) crow[j] = T(0);
    }
    for (int p = 0; p < k; ++p) {
      const T av = trans_a ? a[static_cast<std::ptrdiff_t>(p) * lda + i]
                           : a[static_cast<std::ptrdiff_t>(i) * lda + p];
      if (av == T(0)) continue;
      if (trans_b) {
        for (int j = 0; j < n; ++j)
          crow[j] += av * b[static_cast<std::ptrdiff_t>(j) * ldb + p];
      } else {
        const T* brow = b + static_cast<std::ptrdiff_t>(p) * ldb;
        for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  }
}

}  // namespace

void gemm(bool trans_a, bool trans_b, int m, int n, int k, const float* a,
          int lda, const float* b, int ldb, float beta, float* c, int ldc) {
  gemm_impl(trans_a, trans_b, m, n, k, a, lda, b, ldb, beta, c, ldc);
}

void gemm(bool trans_a, bool trans_b, int m, int n, int k, const double* a,
          int lda, const double* b, int ldb, double beta, double* c, int ldc) {
  gemm_impl(trans_a, trans_b, m, n, k, a, lda, b, ldb, beta, c, ldc);
}

double min_sqdist(const double* xs, const double* ys, const double* zs,
                  std::size_t n, double px, double py, double pz) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = xs[i] - px;
    const double dy = ys[i] - py;
    const double dz = zs[i] - pz;
    const double d = (dx * dx + dy * dy) + dz * dz;
    if (d < best) best = d;
  }
  return best;
}

}  // namespace deepcontext::kernels::scalar
