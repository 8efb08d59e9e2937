#pragma once

// Private dispatch table shared by the per-ISA translation units.

#include "spg/kernels.hpp"

namespace spg::kernels {

struct KernelTable {
  void (*gemm)(MatMode, int64_t, int64_t, int64_t, const double*, int64_t,
               const double*, int64_t, double*, int64_t, bool);
  void (*vadd)(const double*, const double*, double*, int64_t);
  void (*vsub)(const double*, const double*, double*, int64_t);
  void (*vmul)(const double*, const double*, double*, int64_t);
  void (*vscale)(const double*, double, double*, int64_t);
  void (*vaxpy)(double, const double*, double*, int64_t);
  void (*vfma)(const double*, const double*, double*, int64_t, bool);
  void (*vexp)(const double*, double*, int64_t);
  void (*vtanh)(const double*, double*, int64_t);
  void (*vsigmoid)(const double*, double*, int64_t);
  void (*leaky_relu)(const double*, double*, int64_t, double);
  void (*leaky_relu_bwd)(const double*, const double*, double*, int64_t,
                         double, bool);
  void (*tanh_bwd)(const double*, const double*, double*, int64_t, bool);
  void (*sigmoid_bwd)(const double*, const double*, double*, int64_t, bool);
  double (*vsum)(const double*, int64_t);
  double (*vdot)(const double*, const double*, int64_t);
  double (*vmax)(const double*, int64_t);
  double (*vsumsq)(const double*, int64_t);
  void (*col_sum)(const double*, int64_t, int64_t, double*);
  void (*add_colbcast)(const double*, const double*, double*, int64_t,
                       int64_t);
  void (*sub_colbcast)(const double*, const double*, double*, int64_t,
                       int64_t);
  void (*sub_rowbcast)(const double*, const double*, double*, int64_t,
                       int64_t);
  void (*row_max)(const double*, int64_t, int64_t, double*);
  void (*col_max)(const double*, int64_t, int64_t, double*);
  void (*row_sumexp)(const double*, const double*, double*, int64_t, int64_t);
  void (*col_sumexp)(const double*, const double*, double*, int64_t, int64_t);
  void (*row_softmax_scaled)(const double*, const double*, const double*,
                             double*, int64_t, int64_t, bool);
  void (*col_softmax_scaled)(const double*, const double*, const double*,
                             double*, int64_t, int64_t, bool);
  void (*bn_forward)(const double*, const double*, const double*,
                     const double*, const double*, double*, int64_t, int64_t);
  void (*bn_backward_dx)(const double*, const double*, const double*,
                         const double*, const double*, double*, int64_t,
                         int64_t, bool);
  void (*adam_update)(double*, const double*, double*, double*, int64_t,
                      double, double, double, double, double, double);
};

const KernelTable* scalar_table();
#ifdef SPG_BUILD_AVX2
const KernelTable* avx2_table();
#endif
#ifdef SPG_BUILD_AVX512
const KernelTable* avx512_table();
#endif

}  // namespace spg::kernels
