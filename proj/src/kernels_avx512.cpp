// AVX-512 kernel variants (F/DQ/VL). Same structure as the AVX2 unit with
// twice the vector width and mask registers for the column tails.

#include <immintrin.h>

#include <algorithm>
#include <cmath>

#include "kernels_exp.hpp"
#include "kernels_table.hpp"

namespace spg::kernels {
namespace {
#include "kernels_generic.inl"

inline __m512d exp8(__m512d x) {
  const __m512d log2e = _mm512_set1_pd(detail::kLog2E);
  const __m512d half = _mm512_set1_pd(0.5);
  const __m512d c1 = _mm512_set1_pd(detail::kC1);
  const __m512d c2 = _mm512_set1_pd(detail::kC2);
  const __m512d p0 = _mm512_set1_pd(detail::kP0);
  const __m512d p1 = _mm512_set1_pd(detail::kP1);
  const __m512d p2 = _mm512_set1_pd(detail::kP2);
  const __m512d q0 = _mm512_set1_pd(detail::kQ0);
  const __m512d q1 = _mm512_set1_pd(detail::kQ1);
  const __m512d q2 = _mm512_set1_pd(detail::kQ2);
  const __m512d q3 = _mm512_set1_pd(detail::kQ3);
  const __m512d one = _mm512_set1_pd(1.0);
  const __m512d two = _mm512_set1_pd(2.0);

  __m512d z = _mm512_roundscale_pd(
      _mm512_add_pd(_mm512_mul_pd(log2e, x), half),
      _MM_FROUND_TO_NEG_INF | _MM_FROUND_NO_EXC);
  __m512d r = _mm512_fnmadd_pd(z, c1, x);
  r = _mm512_fnmadd_pd(z, c2, r);
  __m512d rr = _mm512_mul_pd(r, r);
  __m512d px =
      _mm512_mul_pd(r, _mm512_fmadd_pd(_mm512_fmadd_pd(p0, rr, p1), rr, p2));
  __m512d qx = _mm512_fmadd_pd(
      _mm512_fmadd_pd(_mm512_fmadd_pd(q0, rr, q1), rr, q2), rr, q3);
  __m512d e = _mm512_div_pd(px, _mm512_sub_pd(qx, px));
  __m512d y = _mm512_fmadd_pd(two, e, one);

  // Out-of-range |z| would make the epi64 conversion garbage, but those lanes
  // get overwritten by the masks below; clamp to keep the conversion defined.
  __m512d zc = _mm512_max_pd(_mm512_min_pd(z, _mm512_set1_pd(2000.0)),
                             _mm512_set1_pd(-2000.0));
  __m512i n = _mm512_cvtpd_epi64(zc);
  __m512i n1 = _mm512_sub_epi64(
      _mm512_srli_epi64(_mm512_add_epi64(n, _mm512_set1_epi64(2048)), 1),
      _mm512_set1_epi64(1024));
  __m512i n2 = _mm512_sub_epi64(n, n1);
  __m512d f1 = _mm512_castsi512_pd(
      _mm512_slli_epi64(_mm512_add_epi64(n1, _mm512_set1_epi64(1023)), 52));
  __m512d f2 = _mm512_castsi512_pd(
      _mm512_slli_epi64(_mm512_add_epi64(n2, _mm512_set1_epi64(1023)), 52));
  y = _mm512_mul_pd(_mm512_mul_pd(y, f1), f2);

  __mmask8 gt = _mm512_cmp_pd_mask(x, _mm512_set1_pd(detail::kExpHi), _CMP_GT_OQ);
  __mmask8 lt = _mm512_cmp_pd_mask(x, _mm512_set1_pd(detail::kExpLo), _CMP_LT_OQ);
  __mmask8 unord = _mm512_cmp_pd_mask(x, x, _CMP_UNORD_Q);
  y = _mm512_mask_blend_pd(gt, y, _mm512_set1_pd(HUGE_VAL));
  y = _mm512_mask_blend_pd(lt, y, _mm512_setzero_pd());
  y = _mm512_mask_blend_pd(unord, y, x);
  return y;
}

inline __m512d tanh8(__m512d x) {
  const __m512d sign = _mm512_set1_pd(-0.0);
  const __m512d one = _mm512_set1_pd(1.0);
  __m512d ax = _mm512_andnot_pd(sign, x);
  __m512d t = exp8(_mm512_mul_pd(_mm512_set1_pd(-2.0), ax));
  __m512d r = _mm512_div_pd(_mm512_sub_pd(one, t), _mm512_add_pd(one, t));
  return _mm512_or_pd(r, _mm512_and_pd(x, sign));
}

inline __m512d sigmoid8(__m512d x) {
  const __m512d one = _mm512_set1_pd(1.0);
  __m512d t = exp8(_mm512_xor_pd(x, _mm512_set1_pd(-0.0)));
  return _mm512_div_pd(one, _mm512_add_pd(one, t));
}

void avx512_vexp(const double* x, double* out, int64_t n) {
  int64_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm512_storeu_pd(out + i, exp8(_mm512_loadu_pd(x + i)));
  for (; i < n; ++i) out[i] = detail::exp_core(x[i]);
}

void avx512_vtanh(const double* x, double* out, int64_t n) {
  int64_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm512_storeu_pd(out + i, tanh8(_mm512_loadu_pd(x + i)));
  for (; i < n; ++i) out[i] = detail::tanh_core(x[i]);
}

void avx512_vsigmoid(const double* x, double* out, int64_t n) {
  int64_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm512_storeu_pd(out + i, sigmoid8(_mm512_loadu_pd(x + i)));
  for (; i < n; ++i) out[i] = detail::sigmoid_core(x[i]);
}

// ---------------------------------------------------------------------------
// GEMM

template <int MR, int NV>
inline void micro_bcast(int64_t k, const double* a, int64_t a_rs, int64_t a_ks,
                        const double* b, int64_t ldb, double* c, int64_t ldc,
                        bool accumulate) {
  __m512d acc[MR][NV];
  for (int r = 0; r < MR; ++r)
    for (int v = 0; v < NV; ++v) acc[r][v] = _mm512_setzero_pd();
  const double* ap[MR];
  for (int r = 0; r < MR; ++r) ap[r] = a + r * a_rs;
  for (int64_t kk = 0; kk < k; ++kk) {
    __m512d bv[NV];
    for (int v = 0; v < NV; ++v)
      bv[v] = _mm512_loadu_pd(b + kk * ldb + 8 * v);
    for (int r = 0; r < MR; ++r) {
      __m512d av = _mm512_set1_pd(*ap[r]);
      ap[r] += a_ks;
      for (int v = 0; v < NV; ++v)
        acc[r][v] = _mm512_fmadd_pd(av, bv[v], acc[r][v]);
    }
  }
  for (int r = 0; r < MR; ++r) {
    for (int v = 0; v < NV; ++v) {
      double* cp = c + r * ldc + 8 * v;
      __m512d res = accumulate
                        ? _mm512_add_pd(_mm512_loadu_pd(cp), acc[r][v])
                        : acc[r][v];
      _mm512_storeu_pd(cp, res);
    }
  }
}

template <int MR>
inline void micro_bcast_tail(int64_t k, const double* a, int64_t a_rs,
                             int64_t a_ks, const double* b, int64_t ldb,
                             double* c, int64_t ldc, bool accumulate,
                             __mmask8 mask) {
  __m512d acc[MR];
  for (int r = 0; r < MR; ++r) acc[r] = _mm512_setzero_pd();
  const double* ap[MR];
  for (int r = 0; r < MR; ++r) ap[r] = a + r * a_rs;
  for (int64_t kk = 0; kk < k; ++kk) {
    __m512d bv = _mm512_maskz_loadu_pd(mask, b + kk * ldb);
    for (int r = 0; r < MR; ++r) {
      __m512d av = _mm512_set1_pd(*ap[r]);
      ap[r] += a_ks;
      acc[r] = _mm512_fmadd_pd(av, bv, acc[r]);
    }
  }
  for (int r = 0; r < MR; ++r) {
    double* cp = c + r * ldc;
    __m512d res =
        accumulate ? _mm512_add_pd(_mm512_maskz_loadu_pd(mask, cp), acc[r])
                   : acc[r];
    _mm512_mask_storeu_pd(cp, mask, res);
  }
}

template <int NV>
inline void run_bcast(int64_t mr, int64_t k, const double* a, int64_t a_rs,
                      int64_t a_ks, const double* b, int64_t ldb, double* c,
                      int64_t ldc, bool accumulate) {
  switch (mr) {
    case 8: micro_bcast<8, NV>(k, a, a_rs, a_ks, b, ldb, c, ldc, accumulate); break;
    case 7: micro_bcast<7, NV>(k, a, a_rs, a_ks, b, ldb, c, ldc, accumulate); break;
    case 6: micro_bcast<6, NV>(k, a, a_rs, a_ks, b, ldb, c, ldc, accumulate); break;
    case 5: micro_bcast<5, NV>(k, a, a_rs, a_ks, b, ldb, c, ldc, accumulate); break;
    case 4: micro_bcast<4, NV>(k, a, a_rs, a_ks, b, ldb, c, ldc, accumulate); break;
    case 3: micro_bcast<3, NV>(k, a, a_rs, a_ks, b, ldb, c, ldc, accumulate); break;
    case 2: micro_bcast<2, NV>(k, a, a_rs, a_ks, b, ldb, c, ldc, accumulate); break;
    default: micro_bcast<1, NV>(k, a, a_rs, a_ks, b, ldb, c, ldc, accumulate); break;
  }
}

inline void run_bcast_tail(int64_t mr, int64_t k, const double* a,
                           int64_t a_rs, int64_t a_ks, const double* b,
                           int64_t ldb, double* c, int64_t ldc,
                           bool accumulate, __mmask8 mask) {
  switch (mr) {
    case 8: micro_bcast_tail<8>(k, a, a_rs, a_ks, b, ldb, c, ldc, accumulate, mask); break;
    case 7: micro_bcast_tail<7>(k, a, a_rs, a_ks, b, ldb, c, ldc, accumulate, mask); break;
    case 6: micro_bcast_tail<6>(k, a, a_rs, a_ks, b, ldb, c, ldc, accumulate, mask); break;
    case 5: micro_bcast_tail<5>(k, a, a_rs, a_ks, b, ldb, c, ldc, accumulate, mask); break;
    case 4: micro_bcast_tail<4>(k, a, a_rs, a_ks, b, ldb, c, ldc, accumulate, mask); break;
    case 3: micro_bcast_tail<3>(k, a, a_rs, a_ks, b, ldb, c, ldc, accumulate, mask); break;
    case 2: micro_bcast_tail<2>(k, a, a_rs, a_ks, b, ldb, c, ldc, accumulate, mask); break;
    default: micro_bcast_tail<1>(k, a, a_rs, a_ks, b, ldb, c, ldc, accumulate, mask); break;
  }
}

void bcast_gemm(int64_t m, int64_t n, int64_t k, const double* a, int64_t a_rs,
                int64_t a_ks, const double* b, int64_t ldb, double* c,
                int64_t ldc, bool accumulate) {
  for (int64_t i = 0; i < m;) {
    int64_t mr = std::min<int64_t>(8, m - i);
    const double* ai = a + i * a_rs;
    double* ci = c + i * ldc;
    int64_t j = 0;
    for (; j + 16 <= n; j += 16)
      run_bcast<2>(mr, k, ai, a_rs, a_ks, b + j, ldb, ci + j, ldc, accumulate);
    for (; j + 8 <= n; j += 8)
      run_bcast<1>(mr, k, ai, a_rs, a_ks, b + j, ldb, ci + j, ldc, accumulate);
    if (j < n) {
      __mmask8 mask = static_cast<__mmask8>((1u << (n - j)) - 1u);
      run_bcast_tail(mr, k, ai, a_rs, a_ks, b + j, ldb, ci + j, ldc,
                     accumulate, mask);
    }
    i += mr;
  }
}

template <int MR, int NR>
inline void micro_dot(int64_t k, const double* a, int64_t lda, const double* b,
                      int64_t ldb, double* c, int64_t ldc, bool accumulate) {
  __m512d acc[MR][NR];
  for (int r = 0; r < MR; ++r)
    for (int q = 0; q < NR; ++q) acc[r][q] = _mm512_setzero_pd();
  int64_t kk = 0;
  for (; kk + 8 <= k; kk += 8) {
    __m512d av[MR];
    for (int r = 0; r < MR; ++r) av[r] = _mm512_loadu_pd(a + r * lda + kk);
    for (int q = 0; q < NR; ++q) {
      __m512d bv = _mm512_loadu_pd(b + q * ldb + kk);
      for (int r = 0; r < MR; ++r)
        acc[r][q] = _mm512_fmadd_pd(av[r], bv, acc[r][q]);
    }
  }
  for (int r = 0; r < MR; ++r) {
    for (int q = 0; q < NR; ++q) {
      double s = _mm512_reduce_add_pd(acc[r][q]);
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
    int64_t mr = std::min<int64_t>(4, m - i);
    for (int64_t j = 0; j < n;) {
      int64_t nr = std::min<int64_t>(4, n - j);
      switch (mr) {
        case 4: run_dot_cols<4>(k, a + i * lda, lda, b + j * ldb, ldb, c + i * ldc + j, ldc, accumulate, nr); break;
        case 3: run_dot_cols<3>(k, a + i * lda, lda, b + j * ldb, ldb, c + i * ldc + j, ldc, accumulate, nr); break;
        case 2: run_dot_cols<2>(k, a + i * lda, lda, b + j * ldb, ldb, c + i * ldc + j, ldc, accumulate, nr); break;
        default: run_dot_cols<1>(k, a + i * lda, lda, b + j * ldb, ldb, c + i * ldc + j, ldc, accumulate, nr); break;
      }
      j += nr;
    }
    i += mr;
  }
}

void avx512_gemm(MatMode mode, int64_t m, int64_t n, int64_t k,
                 const double* a, int64_t lda, const double* b, int64_t ldb,
                 double* c, int64_t ldc, bool accumulate) {
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

const KernelTable* avx512_table() {
  static const KernelTable table = [] {
    KernelTable t = generic_table();
    t.gemm = avx512_gemm;
    t.vexp = avx512_vexp;
    t.vtanh = avx512_vtanh;
    t.vsigmoid = avx512_vsigmoid;
    return t;
  }();
  return &table;
}

}  // namespace spg::kernels
