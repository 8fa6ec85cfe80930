// Compiled with -mavx2 -mfma; never called unless the dispatcher has
// confirmed CPU support.
#include <immintrin.h>

#include <algorithm>
#include <limits>
#include <vector>

#include "deepcontext/kernels.hpp"

namespace deepcontext::kernels::avx2 {
namespace {

struct F32 {
  using T = float;
  using V = __m256;
  static constexpr int W = 8;
  static V zero() { return _mm256_setzero_ps(); }
  static V load(const T* p) { return _mm256_loadu_ps(p); }
  static void store(T* p, V v) { _mm256_storeu_ps(p, v); }
  static V set1(T x) { return _mm256_set1_ps(x); }
  static V fma(V a, V b, V c) { return _mm256_fmadd_ps(a, b, c); }
  static T hsum(V v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    __m128 sh = _mm_movehdup_ps(lo);
    __m128 s = _mm_add_ps(lo, sh);
    sh = _mm_movehl_ps(sh, s);
    s = _mm_add_ss(s, sh);
    return _mm_cvtss_f32(s);
  }
};

struct F64 {
  using T = double;
  using V = __m256d;
  static constexpr int W = 4;
  static V zero() { return _mm256_setzero_pd(); }
  static V load(const T* p) { return _mm256_loadu_pd(p); }
  static void store(T* p, V v) { _mm256_storeu_pd(p, v); }
  static V set1(T x) { return _mm256_set1_pd(x); }
  static V fma(V a, V b, V c) { return _mm256_fmadd_pd(a, b, c); }
  static T hsum(V v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d h = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, h));
  }
};

template <class T>
std::vector<T>& scratch(int slot) {
  thread_local std::vector<T> buffers[2];
  return buffers[slot];
}

template <class T>
const T* transpose_into(const T* src, int rows, int cols, int ld,
                        std::vector<T>& dst) {
  // src is rows x cols with leading dimension ld; dst becomes cols x rows.
  dst.resize(static_cast<std::size_t>(rows) * cols);
  constexpr int kBlock = 32;
  for (int r0 = 0; r0 < rows; r0 += kBlock) {
    const int r1 = std::min(rows, r0 + kBlock);
    for (int c0 = 0; c0 < cols; c0 += kBlock) {
      const int c1 = std::min(cols, c0 + kBlock);
      for (int r = r0; r < r1; ++r)
        for (int c = c0; c < c1; ++c)
          dst[static_cast<std::size_t>(c) * rows + r] =
              src[static_cast<std::ptrdiff_t>(r) * ld + c];
    }
  }
  return dst.data();
}

// C[m,n] += A[m,k] * B[k,n], all row-major, no transposes.
template <class S>
void gemm_nn(int m, int n, int k, const typename S::T* a, int lda,
             const typename S::T* b, int ldb, typename S::T* c, int ldc) {
  using T = typename S::T;
  using V = typename S::V;
  constexpr int W = S::W;
  constexpr int MR = 4;
  constexpr int NR = 2 * W;
  constexpr int KC = 256;

  const int n_main = n - n % NR;
  for (int k0 = 0; k0 < k; k0 += KC) {
    const int k1 = std::min(k, k0 + KC);
    int i = 0;
    for (; i + MR <= m; i += MR) {
      const T* a0 = a + static_cast<std::ptrdiff_t>(i) * lda;
      const T* a1 = a0 + lda;
      const T* a2 = a1 + lda;
      const T* a3 = a2 + lda;
      T* c0 = c + static_cast<std::ptrdiff_t>(i) * ldc;
      T* c1 = c0 + ldc;
      T* c2 = c1 + ldc;
      T* c3 = c2 + ldc;
      for (int j = 0; j < n_main; j += NR) {
        V r00 = S::load(c0 + j), r01 = S::load(c0 + j + W);
        V r10 = S::load(c1 + j), r11 = S::load(c1 + j + W);
        V r20 = S::load(c2 + j), r21 = S::load(c2 + j + W);
        V r30 = S::load(c3 + j), r31 = S::load(c3 + j + W);
        for (int p = k0; p < k1; ++p) {
          const T* brow = b + static_cast<std::ptrdiff_t>(p) * ldb + j;
          const V b0 = S::load(brow);
          const V b1 = S::load(brow + W);
          V av = S::set1(a0[p]);
          r00 = S::fma(av, b0, r00);
          r01 = S::fma(av, b1, r01);
          av = S::set1(a1[p]);
          r10 = S::fma(av, b0, r10);
          r11 = S::fma(av, b1, r11);
          av = S::set1(a2[p]);
          r20 = S::fma(av, b0, r20);
          r21 = S::fma(av, b1, r21);
          av = S::set1(a3[p]);
          r30 = S::fma(av, b0, r30);
          r31 = S::fma(av, b1, r31);
        }
        S::store(c0 + j, r00);
        S::store(c0 + j + W, r01);
        S::store(c1 + j, r10);
        S::store(c1 + j + W, r11);
        S::store(c2 + j, r20);
        S::store(c2 + j + W, r21);
        S::store(c3 + j, r30);
        S::store(c3 + j + W, r31);
      }
      for (int r = 0; r < MR; ++r) {
        const T* arow = a + static_cast<std::ptrdiff_t>(i + r) * lda;
        T* crow = c + static_cast<std::ptrdiff_t>(i + r) * ldc;
        for (int p = k0; p < k1; ++p) {
          const T av = arow[p];
          const T* brow = b + static_cast<std::ptrdiff_t>(p) * ldb;
          for (int j = n_main; j < n; ++j) crow[j] += av * brow[j];
        }
      }
    }
    for (; i < m; ++i) {
      const T* arow = a + static_cast<std::ptrdiff_t>(i) * lda;
      T* crow = c + static_cast<std::ptrdiff_t>(i) * ldc;
      int j = 0;
      for (; j + W <= n; j += W) {
        V acc = S::load(crow + j);
        for (int p = k0; p < k1; ++p)
          acc = S::fma(S::set1(arow[p]),
                       S::load(b + static_cast<std::ptrdiff_t>(p) * ldb + j),
                       acc);
        S::store(crow + j, acc);
      }
      for (; j < n; ++j) {
        T acc = crow[j];
        for (int p = k0; p < k1; ++p)
          acc += arow[p] * b[static_cast<std::ptrdiff_t>(p) * ldb + j];
        crow[j] = acc;
      }
    }
  }
}

// C[m,n] += A[m,k] * B[n,k]^T: every entry is a dot product of two
// contiguous rows.
template <class S>
void gemm_nt(int m, int n, int k, const typename S::T* a, int lda,
             const typename S::T* b, int ldb, typename S::T* c, int ldc) {
  using T = typename S::T;
  using V = typename S::V;
  constexpr int W = S::W;
  const int k_main = k - k % W;
  for (int i = 0; i < m; ++i) {
    const T* arow = a + static_cast<std::ptrdiff_t>(i) * lda;
    T* crow = c + static_cast<std::ptrdiff_t>(i) * ldc;
    int j = 0;
    for (; j + 4 <= n; j += 4) {
      const T* b0 = b + static_cast<std::ptrdiff_t>(j) * ldb;
      const T* b1 = b0 + ldb;
      const T* b2 = b1 + ldb;
      const T* b3 = b2 + ldb;
      V s0 = S::zero(), s1 = S::zero(), s2 = S::zero(), s3 = S::zero();
      for (int p = 0; p < k_main; p += W) {
        const V av = S::load(arow + p);
        s0 = S::fma(av, S::load(b0 + p), s0);
        s1 = S::fma(av, S::load(b1 + p), s1);
        s2 = S::fma(av, S::load(b2 + p), s2);
        s3 = S::fma(av, S::load(b3 + p), s3);
      }
      T t0 = S::hsum(s0), t1 = S::hsum(s1), t2 = S::hsum(s2), t3 = S::hsum(s3);
      for (int p = k_main; p < k; ++p) {
        t0 += arow[p] * b0[p];
        t1 += arow[p] * b1[p];
        t2 += arow[p] * b2[p];
        t3 += arow[p] * b3[p];
      }
      crow[j] += t0;
      crow[j + 1] += t1;
      crow[j + 2] += t2;
      crow[j + 3] += t3;
    }
    for (; j < n; ++j) {
      const T* brow = b + static_cast<std::ptrdiff_t>(j) * ldb;
      V s = S::zero();
      for (int p = 0; p < k_main; p += W)
        s = S::fma(S::load(arow + p), S::load(brow + p), s);
      T t = S::hsum(s);
      for (int p = k_main; p < k; ++p) t += arow[p] * brow[p];
      crow[j] += t;
    }
  }
}

template <class S>
void gemm_impl(bool trans_a, bool trans_b, int m, int n, int k,
               const typename S::T* a, int lda, const typename S::T* b,
               int ldb, typename S::T beta, typename S::T* c, int ldc) {
  using T = typename S::T;
  if (m <= 0 || n <= 0) return;
  if (beta == T(0)) {
    for (int i = 0; i < m; ++i)
      std::fill_n(c + static_cast<std::ptrdiff_t>(i) * ldc, n, T(0));
  }
  if (k <= 0) return;

  if (trans_a) {
    a = transpose_into(a, k, m, lda, scratch<T>(0));
    lda = k;
  }
  if (trans_b) {
    gemm_nt<S>(m, n, k, a, lda, b, ldb, c, ldc);
    return;
  }
  if (n == 1) {
    // Matrix-vector product: B is a column, treat it as a single row.
    const T* col = b;
    if (ldb != 1) {
      auto& buf = scratch<T>(1);
      buf.resize(static_cast<std::size_t>(k));
      for (int p = 0; p < k; ++p) buf[p] = b[static_cast<std::ptrdiff_t>(p) * ldb];
      col = buf.data();
    }
    gemm_nt<S>(m, 1, k, a, lda, col, k, c, ldc);
    return;
  }
  gemm_nn<S>(m, n, k, a, lda, b, ldb, c, ldc);
}

}  // namespace

void gemm(bool trans_a, bool trans_b, int m, int n, int k, const float* a,
          int lda, const float* b, int ldb, float beta, float* c, int ldc) {
  gemm_impl<F32>(trans_a, trans_b, m, n, k, a, lda, b, ldb, beta, c, ldc);
}

void gemm(bool trans_a, bool trans_b, int m, int n, int k, const double* a,
          int lda, const double* b, int ldb, double beta, double* c, int ldc) {
  gemm_impl<F64>(trans_a, trans_b, m, n, k, a, lda, b, ldb, beta, c, ldc);
}

double min_sqdist(const double* xs, const double* ys, const double* zs,
                  std::size_t n, double px, double py, double pz) {
  const __m256d vx = _mm256_set1_pd(px);
  const __m256d vy = _mm256_set1_pd(py);
  const __m256d vz = _mm256_set1_pd(pz);
  __m256d best = _mm256_set1_pd(std::numeric_limits<double>::infinity());
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d dx = _mm256_sub_pd(_mm256_loadu_pd(xs + i), vx);
    const __m256d dy = _mm256_sub_pd(_mm256_loadu_pd(ys + i), vy);
    const __m256d dz = _mm256_sub_pd(_mm256_loadu_pd(zs + i), vz);
    const __m256d d = _mm256_add_pd(
        _mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy)),
        _mm256_mul_pd(dz, dz));
    best = _mm256_min_pd(best, d);
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, best);
  double out = std::min(std::min(lanes[0], lanes[1]), std::min(lanes[2], lanes[3]));
  for (; i < n; ++i) {
    const double dx = xs[i] - px;
    const double dy = ys[i] - py;
    const double dz = zs[i] - pz;
    const double d = (dx * dx + dy * dy) + dz * dz;
    if (d < out) out = d;
  }
  return out;
}

}  // namespace deepcontext::kernels::avx2
