// Runtime ISA selection. Highest supported variant wins unless SPG_SIMD
// forces one (scalar|avx2|avx512).

#include <cstdlib>
#include <cstring>
#include <string>

#include "kernels_table.hpp"
#include "spg/errors.hpp"
#include "spg/kernels.hpp"

namespace spg::kernels {

namespace {

bool cpu_has(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2:
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    case Isa::kAvx512:
      return __builtin_cpu_supports("avx512f") &&
             __builtin_cpu_supports("avx512dq") &&
             __builtin_cpu_supports("avx512vl");
  }
  return false;
}

const KernelTable* table_for(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return scalar_table();
    case Isa::kAvx2:
#ifdef SPG_BUILD_AVX2
      return avx2_table();
#else
      return nullptr;
#endif
    case Isa::kAvx512:
#ifdef SPG_BUILD_AVX512
      return avx512_table();
#else
      return nullptr;
#endif
  }
  return nullptr;
}

Isa pick_initial() {
  if (const char* env = std::getenv("SPG_SIMD")) {
    std::string want(env);
    Isa isa;
    if (want == "scalar")
      isa = Isa::kScalar;
    else if (want == "avx2")
      isa = Isa::kAvx2;
    else if (want == "avx512")
      isa = Isa::kAvx512;
    else
      throw ConfigError("SPG_SIMD must be scalar, avx2 or avx512, got: " +
                        want);
    if (!isa_supported(isa))
      throw ConfigError(std::string("SPG_SIMD requests unsupported variant: ") +
                        want);
    return isa;
  }
  if (isa_supported(Isa::kAvx512)) return Isa::kAvx512;
  if (isa_supported(Isa::kAvx2)) return Isa::kAvx2;
  return Isa::kScalar;
}

struct Active {
  Isa isa;
  const KernelTable* table;
  Active() : isa(pick_initial()), table(table_for(isa)) {}
};

Active& active() {
  static Active a;
  return a;
}

}  // namespace

const char* isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar: return "scalar";
    case Isa::kAvx2: return "avx2";
    case Isa::kAvx512: return "avx512";
  }
  return "?";
}

bool isa_supported(Isa isa) { return cpu_has(isa) && table_for(isa) != nullptr; }

Isa active_isa() { return active().isa; }

void set_isa(Isa isa) {
  if (!isa_supported(isa))
    throw ConfigError(std::string("kernel variant unavailable: ") +
                      isa_name(isa));
  active().isa = isa;
  active().table = table_for(isa);
}

#define SPG_FWD(name, ...) active().table->name(__VA_ARGS__)

void gemm(MatMode mode, int64_t m, int64_t n, int64_t k, const double* a,
          int64_t lda, const double* b, int64_t ldb, double* c, int64_t ldc,
          bool accumulate) {
  SPG_FWD(gemm, mode, m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}
void vadd(const double* a, const double* b, double* out, int64_t n) {
  SPG_FWD(vadd, a, b, out, n);
}
void vsub(const double* a, const double* b, double* out, int64_t n) {
  SPG_FWD(vsub, a, b, out, n);
}
void vmul(const double* a, const double* b, double* out, int64_t n) {
  SPG_FWD(vmul, a, b, out, n);
}
void vscale(const double* a, double s, double* out, int64_t n) {
  SPG_FWD(vscale, a, s, out, n);
}
void vaxpy(double alpha, const double* x, double* y, int64_t n) {
  SPG_FWD(vaxpy, alpha, x, y, n);
}
void vfma(const double* a, const double* b, double* out, int64_t n,
          bool accumulate) {
  SPG_FWD(vfma, a, b, out, n, accumulate);
}
void vexp(const double* x, double* out, int64_t n) { SPG_FWD(vexp, x, out, n); }
void vtanh(const double* x, double* out, int64_t n) {
  SPG_FWD(vtanh, x, out, n);
}
void vsigmoid(const double* x, double* out, int64_t n) {
  SPG_FWD(vsigmoid, x, out, n);
}
void leaky_relu(const double* x, double* out, int64_t n, double slope) {
  SPG_FWD(leaky_relu, x, out, n, slope);
}
void leaky_relu_bwd(const double* x, const double* g, double* dx, int64_t n,
                    double slope, bool accumulate) {
  SPG_FWD(leaky_relu_bwd, x, g, dx, n, slope, accumulate);
}
void tanh_bwd(const double* y, const double* g, double* dx, int64_t n,
              bool accumulate) {
  SPG_FWD(tanh_bwd, y, g, dx, n, accumulate);
}
void sigmoid_bwd(const double* y, const double* g, double* dx, int64_t n,
                 bool accumulate) {
  SPG_FWD(sigmoid_bwd, y, g, dx, n, accumulate);
}
double vsum(const double* x, int64_t n) { return SPG_FWD(vsum, x, n); }
double vdot(const double* a, const double* b, int64_t n) {
  return SPG_FWD(vdot, a, b, n);
}
double vmax(const double* x, int64_t n) { return SPG_FWD(vmax, x, n); }
double vsumsq(const double* x, int64_t n) { return SPG_FWD(vsumsq, x, n); }
void col_sum(const double* x, int64_t rows, int64_t cols, double* out) {
  SPG_FWD(col_sum, x, rows, cols, out);
}
void add_colbcast(const double* x, const double* v, double* out, int64_t rows,
                  int64_t cols) {
  SPG_FWD(add_colbcast, x, v, out, rows, cols);
}
void sub_colbcast(const double* x, const double* v, double* out, int64_t rows,
                  int64_t cols) {
  SPG_FWD(sub_colbcast, x, v, out, rows, cols);
}
void sub_rowbcast(const double* x, const double* v, double* out, int64_t rows,
                  int64_t cols) {
  SPG_FWD(sub_rowbcast, x, v, out, rows, cols);
}
void row_max(const double* x, int64_t rows, int64_t cols, double* out) {
  SPG_FWD(row_max, x, rows, cols, out);
}
void col_max(const double* x, int64_t rows, int64_t cols, double* out) {
  SPG_FWD(col_max, x, rows, cols, out);
}
void row_sumexp(const double* x, const double* shift, double* out,
                int64_t rows, int64_t cols) {
  SPG_FWD(row_sumexp, x, shift, out, rows, cols);
}
void col_sumexp(const double* x, const double* shift, double* out,
                int64_t rows, int64_t cols) {
  SPG_FWD(col_sumexp, x, shift, out, rows, cols);
}
void row_softmax_scaled(const double* x, const double* s, const double* g,
                        double* dx, int64_t rows, int64_t cols,
                        bool accumulate) {
  SPG_FWD(row_softmax_scaled, x, s, g, dx, rows, cols, accumulate);
}
void col_softmax_scaled(const double* x, const double* s, const double* g,
                        double* dx, int64_t rows, int64_t cols,
                        bool accumulate) {
  SPG_FWD(col_softmax_scaled, x, s, g, dx, rows, cols, accumulate);
}
void bn_forward(const double* x, const double* mean, const double* inv_std,
                const double* gamma, const double* beta, double* out,
                int64_t rows, int64_t cols) {
  SPG_FWD(bn_forward, x, mean, inv_std, gamma, beta, out, rows, cols);
}
void bn_backward_dx(const double* xhat, const double* g, const double* gmean,
                    const double* gxmean, const double* gis, double* dx,
                    int64_t rows, int64_t cols, bool accumulate) {
  SPG_FWD(bn_backward_dx, xhat, g, gmean, gxmean, gis, dx, rows, cols,
          accumulate);
}
void adam_update(double* p, const double* g, double* m, double* v, int64_t n,
                 double lr, double beta1, double beta2, double eps, double bc1,
                 double bc2) {
  SPG_FWD(adam_update, p, g, m, v, n, lr, beta1, beta2, eps, bc1, bc2);
}

#undef SPG_FWD

}  // namespace spg::kernels
