// Generic kernel bodies, included once per ISA translation unit so each copy
// is compiled with that unit's target flags. Elementwise loops vectorize per
// element and stay bit-identical across units; reductions use one sequential
// accumulator on purpose so every ISA path sums in the same order.
//
// Expects to be included inside a namespace with kernels_exp.hpp visible.

using spg::kernels::MatMode;

static void generic_gemm(MatMode mode, int64_t m, int64_t n, int64_t k,
                         const double* a, int64_t lda, const double* b,
                         int64_t ldb, double* c, int64_t ldc,
                         bool accumulate) {
  if (!accumulate) {
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < n; ++j) c[i * ldc + j] = 0.0;
  }
  switch (mode) {
    case MatMode::kNN:
      for (int64_t i = 0; i < m; ++i) {
        double* crow = c + i * ldc;
        for (int64_t kk = 0; kk < k; ++kk) {
          double av = a[i * lda + kk];
          const double* brow = b + kk * ldb;
          for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
      }
      break;
    case MatMode::kTN:
      for (int64_t kk = 0; kk < k; ++kk) {
        const double* arow = a + kk * lda;
        const double* brow = b + kk * ldb;
        for (int64_t i = 0; i < m; ++i) {
          double av = arow[i];
          double* crow = c + i * ldc;
          for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
      }
      break;
    case MatMode::kNT:
      for (int64_t i = 0; i < m; ++i) {
        const double* arow = a + i * lda;
        for (int64_t j = 0; j < n; ++j) {
          const double* brow = b + j * ldb;
          double s = 0.0;
          for (int64_t kk = 0; kk < k; ++kk) s += arow[kk] * brow[kk];
          c[i * ldc + j] += s;
        }
      }
      break;
  }
}

static void generic_vadd(const double* a, const double* b, double* out,
                         int64_t n) {
  for (int64_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

static void generic_vsub(const double* a, const double* b, double* out,
                         int64_t n) {
  for (int64_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

static void generic_vmul(const double* a, const double* b, double* out,
                         int64_t n) {
  for (int64_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

static void generic_vscale(const double* a, double s, double* out, int64_t n) {
  for (int64_t i = 0; i < n; ++i) out[i] = a[i] * s;
}

static void generic_vaxpy(double alpha, const double* x, double* y,
                          int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

static void generic_vfma(const double* a, const double* b, double* out,
                         int64_t n, bool accumulate) {
  if (accumulate) {
    for (int64_t i = 0; i < n; ++i) out[i] += a[i] * b[i];
  } else {
    for (int64_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
  }
}

static void generic_vexp(const double* x, double* out, int64_t n) {
  for (int64_t i = 0; i < n; ++i) out[i] = detail::exp_core(x[i]);
}

static void generic_vtanh(const double* x, double* out, int64_t n) {
  for (int64_t i = 0; i < n; ++i) out[i] = detail::tanh_core(x[i]);
}

static void generic_vsigmoid(const double* x, double* out, int64_t n) {
  for (int64_t i = 0; i < n; ++i) out[i] = detail::sigmoid_core(x[i]);
}

static void generic_leaky_relu(const double* x, double* out, int64_t n,
                               double slope) {
  for (int64_t i = 0; i < n; ++i) out[i] = x[i] >= 0.0 ? x[i] : slope * x[i];
}

static void generic_leaky_relu_bwd(const double* x, const double* g,
                                   double* dx, int64_t n, double slope,
                                   bool accumulate) {
  if (accumulate) {
    for (int64_t i = 0; i < n; ++i)
      dx[i] += x[i] >= 0.0 ? g[i] : slope * g[i];
  } else {
    for (int64_t i = 0; i < n; ++i) dx[i] = x[i] >= 0.0 ? g[i] : slope * g[i];
  }
}

static void generic_tanh_bwd(const double* y, const double* g, double* dx,
                             int64_t n, bool accumulate) {
  if (accumulate) {
    for (int64_t i = 0; i < n; ++i) dx[i] += g[i] * (1.0 - y[i] * y[i]);
  } else {
    for (int64_t i = 0; i < n; ++i) dx[i] = g[i] * (1.0 - y[i] * y[i]);
  }
}

static void generic_sigmoid_bwd(const double* y, const double* g, double* dx,
                                int64_t n, bool accumulate) {
  if (accumulate) {
    for (int64_t i = 0; i < n; ++i) dx[i] += g[i] * y[i] * (1.0 - y[i]);
  } else {
    for (int64_t i = 0; i < n; ++i) dx[i] = g[i] * y[i] * (1.0 - y[i]);
  }
}

static double generic_vsum(const double* x, int64_t n) {
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i) s += x[i];
  return s;
}

static double generic_vdot(const double* a, const double* b, int64_t n) {
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

static double generic_vmax(const double* x, int64_t n) {
  double m = x[0];
  for (int64_t i = 1; i < n; ++i) m = x[i] > m ? x[i] : m;
  return m;
}

static double generic_vsumsq(const double* x, int64_t n) {
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i) s += x[i] * x[i];
  return s;
}

static void generic_col_sum(const double* x, int64_t rows, int64_t cols,
                            double* out) {
  for (int64_t j = 0; j < cols; ++j) out[j] = 0.0;
  for (int64_t i = 0; i < rows; ++i) {
    const double* row = x + i * cols;
    for (int64_t j = 0; j < cols; ++j) out[j] += row[j];
  }
}

static void generic_add_colbcast(const double* x, const double* v, double* out,
                                 int64_t rows, int64_t cols) {
  for (int64_t i = 0; i < rows; ++i) {
    const double* row = x + i * cols;
    double* orow = out + i * cols;
    for (int64_t j = 0; j < cols; ++j) orow[j] = row[j] + v[j];
  }
}

static void generic_sub_colbcast(const double* x, const double* v, double* out,
                                 int64_t rows, int64_t cols) {
  for (int64_t i = 0; i < rows; ++i) {
    const double* row = x + i * cols;
    double* orow = out + i * cols;
    for (int64_t j = 0; j < cols; ++j) orow[j] = row[j] - v[j];
  }
}

static void generic_sub_rowbcast(const double* x, const double* v, double* out,
                                 int64_t rows, int64_t cols) {
  for (int64_t i = 0; i < rows; ++i) {
    const double* row = x + i * cols;
    double* orow = out + i * cols;
    double vi = v[i];
    for (int64_t j = 0; j < cols; ++j) orow[j] = row[j] - vi;
  }
}

static void generic_row_max(const double* x, int64_t rows, int64_t cols,
                            double* out) {
  for (int64_t i = 0; i < rows; ++i) {
    const double* row = x + i * cols;
    double m = row[0];
    for (int64_t j = 1; j < cols; ++j) m = row[j] > m ? row[j] : m;
    out[i] = m;
  }
}

static void generic_col_max(const double* x, int64_t rows, int64_t cols,
                            double* out) {
  for (int64_t j = 0; j < cols; ++j) out[j] = x[j];
  for (int64_t i = 1; i < rows; ++i) {
    const double* row = x + i * cols;
    for (int64_t j = 0; j < cols; ++j) out[j] = row[j] > out[j] ? row[j] : out[j];
  }
}

static void generic_row_sumexp(const double* x, const double* shift,
                               double* out, int64_t rows, int64_t cols) {
  for (int64_t i = 0; i < rows; ++i) {
    const double* row = x + i * cols;
    double si = shift[i];
    double s = 0.0;
    for (int64_t j = 0; j < cols; ++j) s += detail::exp_core(row[j] - si);
    out[i] = s;
  }
}

static void generic_col_sumexp(const double* x, const double* shift,
                               double* out, int64_t rows, int64_t cols) {
  for (int64_t j = 0; j < cols; ++j) out[j] = 0.0;
  for (int64_t i = 0; i < rows; ++i) {
    const double* row = x + i * cols;
    for (int64_t j = 0; j < cols; ++j)
      out[j] += detail::exp_core(row[j] - shift[j]);
  }
}

static void generic_row_softmax_scaled(const double* x, const double* s,
                                       const double* g, double* dx,
                                       int64_t rows, int64_t cols,
                                       bool accumulate) {
  for (int64_t i = 0; i < rows; ++i) {
    const double* row = x + i * cols;
    double* drow = dx + i * cols;
    double si = s[i], gi = g[i];
    if (accumulate) {
      for (int64_t j = 0; j < cols; ++j)
        drow[j] += gi * detail::exp_core(row[j] - si);
    } else {
      for (int64_t j = 0; j < cols; ++j)
        drow[j] = gi * detail::exp_core(row[j] - si);
    }
  }
}

static void generic_col_softmax_scaled(const double* x, const double* s,
                                       const double* g, double* dx,
                                       int64_t rows, int64_t cols,
                                       bool accumulate) {
  for (int64_t i = 0; i < rows; ++i) {
    const double* row = x + i * cols;
    double* drow = dx + i * cols;
    if (accumulate) {
      for (int64_t j = 0; j < cols; ++j)
        drow[j] += g[j] * detail::exp_core(row[j] - s[j]);
    } else {
      for (int64_t j = 0; j < cols; ++j)
        drow[j] = g[j] * detail::exp_core(row[j] - s[j]);
    }
  }
}

static void generic_bn_forward(const double* x, const double* mean,
                               const double* inv_std, const double* gamma,
                               const double* beta, double* out, int64_t rows,
                               int64_t cols) {
  for (int64_t i = 0; i < rows; ++i) {
    const double* row = x + i * cols;
    double* orow = out + i * cols;
    for (int64_t j = 0; j < cols; ++j)
      orow[j] = (row[j] - mean[j]) * inv_std[j] * gamma[j] + beta[j];
  }
}

static void generic_bn_backward_dx(const double* xhat, const double* g,
                                   const double* gmean, const double* gxmean,
                                   const double* gis, double* dx, int64_t rows,
                                   int64_t cols, bool accumulate) {
  for (int64_t i = 0; i < rows; ++i) {
    const double* hrow = xhat + i * cols;
    const double* grow = g + i * cols;
    double* drow = dx + i * cols;
    if (accumulate) {
      for (int64_t j = 0; j < cols; ++j)
        drow[j] += gis[j] * (grow[j] - gmean[j] - hrow[j] * gxmean[j]);
    } else {
      for (int64_t j = 0; j < cols; ++j)
        drow[j] = gis[j] * (grow[j] - gmean[j] - hrow[j] * gxmean[j]);
    }
  }
}

static void generic_adam_update(double* p, const double* g, double* m,
                                double* v, int64_t n, double lr, double beta1,
                                double beta2, double eps, double bc1,
                                double bc2) {
  for (int64_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    double mhat = m[i] / bc1;
    double vhat = v[i] / bc2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

static spg::kernels::KernelTable generic_table() {
  spg::kernels::KernelTable t;
  t.gemm = generic_gemm;
  t.vadd = generic_vadd;
  t.vsub = generic_vsub;
  t.vmul = generic_vmul;
  t.vscale = generic_vscale;
  t.vaxpy = generic_vaxpy;
  t.vfma = generic_vfma;
  t.vexp = generic_vexp;
  t.vtanh = generic_vtanh;
  t.vsigmoid = generic_vsigmoid;
  t.leaky_relu = generic_leaky_relu;
  t.leaky_relu_bwd = generic_leaky_relu_bwd;
  t.tanh_bwd = generic_tanh_bwd;
  t.sigmoid_bwd = generic_sigmoid_bwd;
  t.vsum = generic_vsum;
  t.vdot = generic_vdot;
  t.vmax = generic_vmax;
  t.vsumsq = generic_vsumsq;
  t.col_sum = generic_col_sum;
  t.add_colbcast = generic_add_colbcast;
  t.sub_colbcast = generic_sub_colbcast;
  t.sub_rowbcast = generic_sub_rowbcast;
  t.row_max = generic_row_max;
  t.col_max = generic_col_max;
  t.row_sumexp = generic_row_sumexp;
  t.col_sumexp = generic_col_sumexp;
  t.row_softmax_scaled = generic_row_softmax_scaled;
  t.col_softmax_scaled = generic_col_softmax_scaled;
  t.bn_forward = generic_bn_forward;
  t.bn_backward_dx = generic_bn_backward_dx;
  t.adam_update = generic_adam_update;
  return t;
}
