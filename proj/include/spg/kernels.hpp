#pragma once

// Dense f64 compute kernels. Scalar reference implementations plus AVX2 and
// AVX-512 variants, selected once at startup from CPUID (override with
// SPG_SIMD=scalar|avx2|avx512). Elementwise kernels are bit-identical across
// variants; GEMM and reductions may differ by rounding only and are
// equivalence-tested against the scalar path.

#include <cstdint>

namespace spg::kernels {

enum class Isa { kScalar = 0, kAvx2 = 1, kAvx512 = 2 };

const char* isa_name(Isa isa);
bool isa_supported(Isa isa);
Isa active_isa();
// Test hook; throws ConfigError if the CPU or build lacks the variant.
void set_isa(Isa isa);

enum class MatMode {
  kNN,  // C = A(m×k) · B(k×n)
  kNT,  // C = A(m×k) · B(n×k)ᵀ
  kTN,  // C = A(k×m)ᵀ · B(k×n)
};

// C is m×n with leading dimension ldc; accumulate adds into C instead of
// overwriting.
void gemm(MatMode mode, int64_t m, int64_t n, int64_t k, const double* a,
          int64_t lda, const double* b, int64_t ldb, double* c, int64_t ldc,
          bool accumulate);

// Elementwise.
void vadd(const double* a, const double* b, double* out, int64_t n);
void vsub(const double* a, const double* b, double* out, int64_t n);
void vmul(const double* a, const double* b, double* out, int64_t n);
void vscale(const double* a, double s, double* out, int64_t n);
void vaxpy(double alpha, const double* x, double* y, int64_t n);  // y += α·x
void vfma(const double* a, const double* b, double* out, int64_t n,
          bool accumulate);  // out (+)= a⊙b
void vexp(const double* x, double* out, int64_t n);
void vtanh(const double* x, double* out, int64_t n);
void vsigmoid(const double* x, double* out, int64_t n);
void leaky_relu(const double* x, double* out, int64_t n, double slope);
// Derivative masks use the convention d/dx at 0 = 1.
void leaky_relu_bwd(const double* x, const double* g, double* dx, int64_t n,
                    double slope, bool accumulate);
void tanh_bwd(const double* y, const double* g, double* dx, int64_t n,
              bool accumulate);  // dx (+)= g·(1−y²)
void sigmoid_bwd(const double* y, const double* g, double* dx, int64_t n,
                 bool accumulate);  // dx (+)= g·y·(1−y)

// Reductions (sequential accumulation order in every variant).
double vsum(const double* x, int64_t n);
double vdot(const double* a, const double* b, int64_t n);
double vmax(const double* x, int64_t n);  // n >= 1
double vsumsq(const double* x, int64_t n);

// Row-major matrix helpers, x is rows×cols.
void col_sum(const double* x, int64_t rows, int64_t cols, double* out);
void add_colbcast(const double* x, const double* v, double* out, int64_t rows,
                  int64_t cols);  // out[i][j] = x[i][j] + v[j]
void sub_colbcast(const double* x, const double* v, double* out, int64_t rows,
                  int64_t cols);
void sub_rowbcast(const double* x, const double* v, double* out, int64_t rows,
                  int64_t cols);  // out[i][j] = x[i][j] − v[i]
void row_max(const double* x, int64_t rows, int64_t cols, double* out);
void col_max(const double* x, int64_t rows, int64_t cols, double* out);
// out[i] = Σ_j exp(x[i][j] − shift[i]); likewise per column.
void row_sumexp(const double* x, const double* shift, double* out,
                int64_t rows, int64_t cols);
void col_sumexp(const double* x, const double* shift, double* out,
                int64_t rows, int64_t cols);
// dx[i][j] (+)= g[i]·exp(x[i][j] − s[i]); column variant mirrors.
void row_softmax_scaled(const double* x, const double* s, const double* g,
                        double* dx, int64_t rows, int64_t cols,
                        bool accumulate);
void col_softmax_scaled(const double* x, const double* s, const double* g,
                        double* dx, int64_t rows, int64_t cols,
                        bool accumulate);

// BatchNorm appliers.
void bn_forward(const double* x, const double* mean, const double* inv_std,
                const double* gamma, const double* beta, double* out,
                int64_t rows, int64_t cols);
// dx[i][j] (+)= gis[j]·(g[i][j] − gmean[j] − xhat[i][j]·gxmean[j]) where
// gis[j] = gamma[j]·inv_std[j].
void bn_backward_dx(const double* xhat, const double* g, const double* gmean,
                    const double* gxmean, const double* gis, double* dx,
                    int64_t rows, int64_t cols, bool accumulate);

// Fused Adam update with bias correction terms bc1 = 1−β1ᵗ, bc2 = 1−β2ᵗ.
void adam_update(double* p, const double* g, double* m, double* v, int64_t n,
                 double lr, double beta1, double beta2, double eps, double bc1,
                 double bc2);

}  // namespace spg::kernels
