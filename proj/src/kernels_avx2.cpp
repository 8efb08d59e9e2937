// AVX2+FMA kernel variants. The exp/tanh/sigmoid code mirrors
// kernels_exp.hpp operation-for-operation (FMA included) so results are
// bit-identical with the scalar path; GEMM differs only by summation order.

#include <immintrin.h>

#include <algorithm>
#include <cmath>

#include "kernels_exp.hpp"
#include "kernels_table.hpp"

namespace spg::kernels {
namespace {
#include "kernels_generic.inl"

inline __m256d exp4(__m256d x) {
  const __m256d log2e = _mm256_set1_pd(detail::kLog2E);
  const __m256d half = _mm256_set1_pd(0.5);
  const __m256d c1 = _mm256_set1_pd(detail::kC1);
  const __m256d c2 = _mm256_set1_pd(detail::kC2);
  const __m256d p0 = _mm256_set1_pd(detail::kP0);
  const __m256d p1 = _mm256_set1_pd(detail::kP1);
  const __m256d p2 = _mm256_set1_pd(detail::kP2);
  const __m256d q0 = _mm256_set1_pd(detail::kQ0);
  const __m256d q1 = _mm256_set1_pd(detail::kQ1);
  const __m256d q2 = _mm256_set1_pd(detail::kQ2);
  const __m256d q3 = _mm256_set1_pd(detail::kQ3);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d two = _mm256_set1_pd(2.0);
  const __m256d magic = _mm256_set1_pd(6755399441055744.0);  // 1.5·2^52

  __m256d z = _mm256_floor_pd(_mm256_add_pd(_mm256_mul_pd(log2e, x), half));
  __m256d r = _mm256_fnmadd_pd(z, c1, x);
  r = _mm256_fnmadd_pd(z, c2, r);
  __m256d rr = _mm256_mul_pd(r, r);
  __m256d px =
      _mm256_mul_pd(r, _mm256_fmadd_pd(_mm256_fmadd_pd(p0, rr, p1), rr, p2));
  __m256d qx = _mm256_fmadd_pd(
      _mm256_fmadd_pd(_mm256_fmadd_pd(q0, rr, q1), rr, q2), rr, q3);
  __m256d e = _mm256_div_pd(px, _mm256_sub_pd(qx, px));
  __m256d y = _mm256_fmadd_pd(two, e, one);

  // 2^z scaling in two exact factors (valid for |z| within the exp range).
  __m256i n = _mm256_sub_epi64(_mm256_castpd_si256(_mm256_add_pd(z, magic)),
                               _mm256_castpd_si256(magic));
  __m256i n1 = _mm256_sub_epi64(
      _mm256_srli_epi64(_mm256_add_epi64(n, _mm256_set1_epi64x(2048)), 1),
      _mm256_set1_epi64x(1024));
  __m256i n2 = _mm256_sub_epi64(n, n1);
  __m256d f1 = _mm256_castsi256_pd(_mm256_slli_epi64(
      _mm256_add_epi64(n1, _mm256_set1_epi64x(1023)), 52));
  __m256d f2 = _mm256_castsi256_pd(_mm256_slli_epi64(
      _mm256_add_epi64(n2, _mm256_set1_epi64x(1023)), 52));
  y = _mm256_mul_pd(_mm256_mul_pd(y, f1), f2);

  __m256d gt = _mm256_cmp_pd(x, _mm256_set1_pd(detail::kExpHi), _CMP_GT_OQ);
  __m256d lt = _mm256_cmp_pd(x, _mm256_set1_pd(detail::kExpLo), _CMP_LT_OQ);
  __m256d unord = _mm256_cmp_pd(x, x, _CMP_UNORD_Q);
  y = _mm256_blendv_pd(y, _mm256_set1_pd(HUGE_VAL), gt);
  y = _mm256_blendv_pd(y, _mm256_setzero_pd(), lt);
  y = _mm256_blendv_pd(y, x, unord);
  return y;
}

inline __m256d tanh4(__m256d x) {
  const __m256d sign = _mm256_set1_pd(-0.0);
  const __m256d one = _mm256_set1_pd(1.0);
  __m256d ax = _mm256_andnot_pd(sign, x);
  __m256d t = exp4(_mm256_mul_pd(_mm256_set1_pd(-2.0), ax));
  __m256d r = _mm256_div_pd(_mm256_sub_pd(one, t), _mm256_add_pd(one, t));
  return _mm256_or_pd(r, _mm256_and_pd(x, sign));
}

inline __m256d sigmoid4(__m256d x) {
  const __m256d one = _mm256_set1_pd(1.0);
  __m256d t = exp4(_mm256_xor_pd(x, _mm256_set1_pd(-0.0)));
  return _mm256_div_pd(one, _mm256_add_pd(one, t));
}

void avx2_vexp(const double* x, double* out, int64_t n) {
  int64_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, exp4(_mm256_loadu_pd(x + i)));
  for (; i < n; ++i) out[i] = detail::exp_core(x[i]);
}

void avx2_vtanh(const double* x, double* out, int64_t n) {
  int64_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, tanh4(_mm256_loadu_pd(x + i)));
  for (; i < n; ++i) out[i] = detail::tanh_core(x[i]);
}

void avx2_vsigmoid(const double* x, double* out, int64_t n) {
  int64_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, sigmoid4(_mm256_loadu_pd(x + i)));
  for (; i < n; ++i) out[i] = detail::sigmoid_core(x[i]);
}

// ---------------------------------------------------------------------------
// GEMM. kNN and kTN share the broadcast-FMA kernel (they differ only in how
// A is strided); kNT uses a dot-product kernel since both operands are
// contiguous along k.

inline __m256i tail_mask(int64_t c) {
  alignas(32) static const int64_t bits[8] = {-1, -1, -1, -1, 0, 0, 0, 0};
  return _mm256_loadu_si256(
      reinterpret_cast<const __m256i*>(bits + (4 - c)));
}

template <int MR, int NV>
inline void micro_bcast(int64_t k, const double* a, int64_t a_rs, int64_t a_ks,
                        const double* b, int64_t ldb, double* c, int64_t ldc,
                        bool accumulate) {
  __m256d acc[MR][NV];
  for (int r = 0; r < MR; ++r)
    for (int v = 0; v < NV; ++v) acc[r][v] = _mm256_setzero_pd();
  const double* ap[MR];
  for (int r = 0; r < MR; ++r) ap[r] = a + r * a_rs;
  for (int64_t kk = 0; kk < k; ++kk) {
    __m256d bv[NV];
    for (int v = 0; v < NV; ++v)
      bv[v] = _mm256_loadu_pd(b + kk * ldb + 4 * v);
    for (int r = 0; r < MR; ++r) {
      __m256d av = _mm256_broadcast_sd(ap[r]);
      ap[r] += a_ks;
      for (int v = 0; v < NV; ++v)
        acc[r][v] = _mm256_fmadd_pd(av, bv[v], acc[r][v]);
    }
  }
  for (int r = 0; r < MR; ++r) {
    for (int v = 0; v < NV; ++v) {
      double* cp = c + r * ldc + 4 * v;
      __m256d res = accumulate
                        ? _mm256_add_pd(_mm256_loadu_pd(cp), acc[r][v])
                        : acc[r][v];
      _mm256_storeu_pd(cp, res);
    }
  }
}

template <int MR>
inline void micro_bcast_tail(int64_t k, const double* a, int64_t a_rs,
                             int64_t a_ks, const double* b, int64_t ldb,
                             double* c, int64_t ldc, bool accumulate,
                             int64_t ncols) {
  const __m256i mask = tail_mask(ncols);
  __m256d acc[MR];
  for (int r = 0; r < MR; ++r) acc[r] = _mm256_setzero_pd();
  const double* ap[MR];
  for (int r = 0; r < MR; ++r) ap[r] = a + r * a_rs;
  for (int64_t kk = 0; kk < k; ++kk) {
    __m256d bv = _mm256_maskload_pd(b + kk * ldb, mask);
    for (int r = 0; r < MR; ++r) {
      __m256d av = _mm256_broadcast_sd(ap[r]);
      ap[r] += a_ks;
      acc[r] = _mm256_fmadd_pd(av, bv, acc[r]);
    }
  }
  for (int r = 0; r < MR; ++r) {
    double* cp = c + r * ldc;
    __m256d res = accumulate
                      ? _mm256_add_pd(_mm256_maskload_pd(cp, mask), acc[r])
                      : acc[r];
    _mm256_maskstore_pd(cp, mask, res);
  }
}

template <int NV>
inline void run_bcast(int64_t mr, int64_t k, const double* a, int64_t a_rs,
                      int64_t a_ks, const double* b, int64_t ldb, double* c,
                      int64_t ldc, bool accumulate) {
  switch (mr) {
    case 4: micro_bcast<4, NV>(k, a, a_rs, a_ks, b, ldb, c, ldc, accumulate); break;
    case 3: micro_bcast<3, NV>(k, a, a_rs, a_ks, b, ldb, c, ldc, accumulate); break;
    case 2: micro_bcast<2, NV>(k, a, a_rs, a_ks, b, ldb, c, ldc, accumulate); break;
    default: micro_bcast<1, NV>(k, a, a_rs, a_ks, b, ldb, c, ldc, accumulate); break;
  }
}

inline void run_bcast_tail(int64_t mr, int64_t k, const double* a,
                           int64_t a_rs, int64_t a_ks, const double* b,
                           int64_t ldb, double* c, int64_t ldc,
                           bool accumulate, int64_t ncols) {
  switch (mr) {
    case 4: micro_bcast_tail<4>(k, a, a_rs, a_ks, b, ldb, c, ldc, accumulate, ncols); break;
    case 3: micro_bcast_tail<3>(k, a, a_rs, a_ks, b, ldb, c, ldc, accumulate, ncols); break;
    case 2: micro_bcast_tail<2>(k, a, a_rs, a_ks, b, ldb, c, ldc, accumulate, ncols); break;
    default: micro_bcast_tail<1>(k, a, a_rs, a_ks, b, ldb, c, ldc, accumulate, ncols); break;
  }
}

void bcast_gemm(int64_t m, int64_t n, int64_t k, const double* a, int64_t a_rs,
                int64_t a_ks, const double* b, int64_t ldb, double* c,
                int64_t ldc, bool accumulate) {
  for (int64_t i = 0; i < m;) {
    int64_t mr = std::min<int64_t>(4, m - i);
    const double* ai = a + i * a_rs;
    double* ci = c + i * ldc;
    int64_t j = 0;
    for (; j + 8 <= n; j += 8)
      run_bcast<2>(mr, k, ai, a_rs, a_ks, b + j, ldb, ci + j, ldc, accumulate);
    for (; j + 4 <= n; j += 4)
      run_bcast<1>(mr, k, ai, a_rs, a_ks, b + j, ldb, ci + j, ldc, accumulate);
    if (j < n)
      run_bcast_tail(mr, k, ai, a_rs, a_ks, b + j, ldb, ci + j, ldc,
                     accumulate, n - j);
    i += mr;
  }
}

inline double hsum4(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

template <int MR, int NR>
inline void micro_dot(int64_t k, const double* a, int64_t lda, const double* b,
                      int64_t ldb, double* c, int64_t ldc, bool accumulate) {
  __m256d acc[MR][NR];
  for (int r = 0; r < MR; ++r)
    for (int q = 0; q < NR; ++q) acc[r][q] = _mm256_setzero_pd();
  int64_t kk = 0;
  for (; kk + 4 <= k; kk += 4) {
    __m256d av[MR];
    for (int r = 0; r < MR; ++r) av[r] = _mm256_loadu_pd(a + r * lda + kk);
    for (int q = 0; q < NR; ++q) {
      __m256d bv = _mm256_loadu_pd(b + q * ldb + kk);
      for (int r = 0; r < MR; ++r)
        acc[r][q] = _mm256_fmadd_pd(av[r], bv, acc[r][q]);
    }
  }
  for (int r = 0; r < MR; ++r) {
    for (int q = 0; q < NR; ++q) {
      double s = hsum4(acc[r][q]);
      for (int64_t t = kk; t < k; ++t) s += a[r * lda + t] * b[q * ldb + t];
      double* cp = c + r * ldc + q;
      *cp = accumulate ? *cp + s : s;
    }
  }
}

template <int MR>
inline void run_dot_cols(int64_t k, const double* a, int64_t lda,
                         const double* b, int64_t ldb, double* c, int64_t ldc,
                         bool accumulate, int64_t nr) {
  switch (nr) {
    case 4: micro_dot<MR, 4>(k, a, lda, b, ldb, c, ldc, accumulate); break;
    case 3: micro_dot<MR, 3>(k, a, lda, b, ldb, c, ldc, accumulate); break;
    case 2: micro_dot<MR, 2>(k, a, lda, b, ldb, c, ldc, accumulate); break;
    default: micro_dot<MR, 1>(k, a, lda, b, ldb, c, ldc, accumulate); break;
  }
}

void dot_gemm(int64_t m, int64_t n, int64_t k, const double* a, int64_t lda,
              const double* b, int64_t ldb, double* c, int64_t ldc,
              bool accumulate) {
  for (int64_t i = 0; i < m;) {
    int64_t mr = std::min<int64_t>(2, m - i);
    for (int64_t j = 0; j < n;) {
      int64_t nr = std::min<int64_t>(4, n - j);
      if (mr == 2)
        run_dot_cols<2>(k, a + i * lda, lda, b + j * ldb, ldb,
                        c + i * ldc + j, ldc, accumulate, nr);
      else
        run_dot_cols<1>(k, a + i * lda, lda, b + j * ldb, ldb,
                        c + i * ldc + j, ldc, accumulate, nr);
      j += nr;
    }
    i += mr;
  }
}

void avx2_gemm(MatMode mode, int64_t m, int64_t n, int64_t k, const double* a,
               int64_t lda, const double* b, int64_t ldb, double* c,
               int64_t ldc, bool accumulate) {
  if (m == 0 || n == 0) return;
  if (k == 0) {
    if (!accumulate)
      for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) c[i * ldc + j] = 0.0;
    return;
  }
  switch (mode) {
    case MatMode::kNN: bcast_gemm(m, n, k, a, lda, 1, b, ldb, c, ldc, accumulate); break;
    case MatMode::kTN: bcast_gemm(m, n, k, a, 1, lda, b, ldb, c, ldc, accumulate); break;
    case MatMode::kNT: dot_gemm(m, n, k, a, lda, b, ldb, c, ldc, accumulate); break;
  }
}

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable table = [] {
    KernelTable t = generic_table();
    t.gemm = avx2_gemm;
    t.vexp = avx2_vexp;
    t.vtanh = avx2_vtanh;
    t.vsigmoid = avx2_vsigmoid;
    return t;
  }();
  return &table;
}

}  // namespace spg::kernels
