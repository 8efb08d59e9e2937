#include "spg/ops.hpp"

#include <cmath>
#include <cstring>

#include "spg/kernels.hpp"

namespace spg::ad {

namespace ker = spg::kernels;

namespace {

void attach(Tape& t, Tensor& out, bool any_rg, std::function<void()> fn) {
  if (t.recording() && any_rg) {
    out.set_requires_grad(true);
    out.data()->backward_fn = std::move(fn);
    t.record(out);
  }
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!(a.shape() == b.shape()))
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape().str() +
                     " vs " + b.shape().str());
}

}  // namespace

Tensor matmul(Tape& t, const Tensor& a, const Tensor& b) {
  if (a.shape().rank != 2 || b.shape().rank != 2 ||
      a.shape()[1] != b.shape()[0])
    throw ShapeError("matmul: incompatible shapes " + a.shape().str() + " x " +
                     b.shape().str());
  const int64_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  Tensor out = Tensor::uninit(Shape::mat(m, n));
  ker::gemm(ker::MatMode::kNN, m, n, k, a.value().data(), k, b.value().data(),
            n, out.value().data(), n, false);
  attach(t, out, a.requires_grad() || b.requires_grad(),
         [ap = a.ptr(), bp = b.ptr(), self = out.data(), m, n, k]() {
           const double* g = self->grad.data();
           if (ap->requires_grad)
             ker::gemm(ker::MatMode::kNT, m, k, n, g, n, bp->value.data(), n,
                       ap->grad_data(), k, true);
           if (bp->requires_grad)
             ker::gemm(ker::MatMode::kTN, k, n, m, ap->value.data(), k, g, n,
                       bp->grad_data(), n, true);
         });
  return out;
}

Tensor bmm_nt(Tape& t, const Tensor& a, const Tensor& b) {
  if (a.shape().rank != 3 || b.shape().rank != 3 ||
      a.shape()[0] != b.shape()[0] || a.shape()[2] != b.shape()[2])
    throw ShapeError("bmm_nt: incompatible shapes " + a.shape().str() + " x " +
                     b.shape().str());
  const int64_t bs = a.shape()[0], m = a.shape()[1], k = a.shape()[2],
                n = b.shape()[1];
  Tensor out = Tensor::uninit(Shape::cube(bs, m, n));
  for (int64_t q = 0; q < bs; ++q)
    ker::gemm(ker::MatMode::kNT, m, n, k, a.value().data() + q * m * k, k,
              b.value().data() + q * n * k, k, out.value().data() + q * m * n,
              n, false);
  attach(t, out, a.requires_grad() || b.requires_grad(),
         [ap = a.ptr(), bp = b.ptr(), self = out.data(), bs, m, n, k]() {
           const double* g = self->grad.data();
           for (int64_t q = 0; q < bs; ++q) {
             const double* gq = g + q * m * n;
             if (ap->requires_grad)
               ker::gemm(ker::MatMode::kNN, m, k, n, gq, n,
                         bp->value.data() + q * n * k, k,
                         ap->grad_data() + q * m * k, k, true);
             if (bp->requires_grad)
               ker::gemm(ker::MatMode::kTN, n, k, m, gq, n,
                         ap->value.data() + q * m * k, k,
                         bp->grad_data() + q * n * k, k, true);
           }
         });
  return out;
}

Tensor add(Tape& t, const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  const int64_t n = a.shape().numel();
  Tensor out = Tensor::uninit(a.shape());
  ker::vadd(a.value().data(), b.value().data(), out.value().data(), n);
  attach(t, out, a.requires_grad() || b.requires_grad(),
         [ap = a.ptr(), bp = b.ptr(), self = out.data(), n]() {
           const double* g = self->grad.data();
           if (ap->requires_grad) ker::vaxpy(1.0, g, ap->grad_data(), n);
           if (bp->requires_grad) ker::vaxpy(1.0, g, bp->grad_data(), n);
         });
  return out;
}

Tensor sub(Tape& t, const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  const int64_t n = a.shape().numel();
  Tensor out = Tensor::uninit(a.shape());
  ker::vsub(a.value().data(), b.value().data(), out.value().data(), n);
  attach(t, out, a.requires_grad() || b.requires_grad(),
         [ap = a.ptr(), bp = b.ptr(), self = out.data(), n]() {
           const double* g = self->grad.data();
           if (ap->requires_grad) ker::vaxpy(1.0, g, ap->grad_data(), n);
           if (bp->requires_grad) ker::vaxpy(-1.0, g, bp->grad_data(), n);
         });
  return out;
}

Tensor mul(Tape& t, const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  const int64_t n = a.shape().numel();
  Tensor out = Tensor::uninit(a.shape());
  ker::vmul(a.value().data(), b.value().data(), out.value().data(), n);
  attach(t, out, a.requires_grad() || b.requires_grad(),
         [ap = a.ptr(), bp = b.ptr(), self = out.data(), n]() {
           const double* g = self->grad.data();
           if (ap->requires_grad)
             ker::vfma(g, bp->value.data(), ap->grad_data(), n, true);
           if (bp->requires_grad)
             ker::vfma(g, ap->value.data(), bp->grad_data(), n, true);
         });
  return out;
}

Tensor add_rowvec(Tape& t, const Tensor& a, const Tensor& v) {
  const auto& s = a.shape();
  if (s.rank < 2 || v.shape().rank != 1)
    throw ShapeError("add_rowvec: need matrix + vector, got " + s.str() +
                     " and " + v.shape().str());
  const int64_t cols = s[s.rank - 1];
  const int64_t rows = s.numel() / cols;
  if (v.shape()[0] != cols)
    throw ShapeError("add_rowvec: bias length " + v.shape().str() +
                     " vs row width " + std::to_string(cols));
  Tensor out = Tensor::uninit(s);
  ker::add_colbcast(a.value().data(), v.value().data(), out.value().data(),
                    rows, cols);
  attach(t, out, a.requires_grad() || v.requires_grad(),
         [ap = a.ptr(), vp = v.ptr(), self = out.data(), rows, cols]() {
           const double* g = self->grad.data();
           if (ap->requires_grad)
             ker::vaxpy(1.0, g, ap->grad_data(), rows * cols);
           if (vp->requires_grad) {
             std::vector<double> colsum(cols);
             ker::col_sum(g, rows, cols, colsum.data());
             ker::vaxpy(1.0, colsum.data(), vp->grad_data(), cols);
           }
         });
  return out;
}

namespace {

// Broadcast layout of a keepdims reduction against its source: either one
// value per row (over_last=true, r is ...×R×1) or one per column
// (over_last=false, r is ...×1×C). blocks is the number of leading matrices.
struct BcastInfo {
  int64_t blocks, rows, cols;
  bool over_last;
};

BcastInfo bcast_info(const Shape& a, const Shape& r) {
  if (a.rank == 2 && r.rank == 2 && r[0] == a[0] && r[1] == 1)
    return {1, a[0], a[1], true};
  if (a.rank == 2 && r.rank == 2 && r[0] == 1 && r[1] == a[1])
    return {1, a[0], a[1], false};
  if (a.rank == 3 && r.rank == 3 && r[0] == a[0] && r[1] == a[1] && r[2] == 1)
    return {a[0], a[1], a[2], true};
  if (a.rank == 3 && r.rank == 3 && r[0] == a[0] && r[1] == 1 && r[2] == a[2])
    return {a[0], a[1], a[2], false};
  throw ShapeError("sub_bcast: cannot broadcast " + r.str() + " against " +
                   a.str());
}

}  // namespace

Tensor sub_bcast(Tape& t, const Tensor& a, const Tensor& r) {
  const BcastInfo info = bcast_info(a.shape(), r.shape());
  Tensor out = Tensor::uninit(a.shape());
  const int64_t block = info.rows * info.cols;
  for (int64_t q = 0; q < info.blocks; ++q) {
    const double* av = a.value().data() + q * block;
    double* ov = out.value().data() + q * block;
    if (info.over_last) {
      ker::sub_rowbcast(av, r.value().data() + q * info.rows, ov, info.rows,
                        info.cols);
    } else {
      ker::sub_colbcast(av, r.value().data() + q * info.cols, ov, info.rows,
                        info.cols);
    }
  }
  attach(t, out, a.requires_grad() || r.requires_grad(),
         [ap = a.ptr(), rp = r.ptr(), self = out.data(), info, block]() {
           const double* g = self->grad.data();
           if (ap->requires_grad)
             ker::vaxpy(1.0, g, ap->grad_data(), info.blocks * block);
           if (rp->requires_grad) {
             double* rg = rp->grad_data();
             for (int64_t q = 0; q < info.blocks; ++q) {
               const double* gq = g + q * block;
               if (info.over_last) {
                 for (int64_t i = 0; i < info.rows; ++i)
                   rg[q * info.rows + i] -=
                       ker::vsum(gq + i * info.cols, info.cols);
               } else {
                 std::vector<double> cs(info.cols);
                 ker::col_sum(gq, info.rows, info.cols, cs.data());
                 ker::vaxpy(-1.0, cs.data(), rg + q * info.cols, info.cols);
               }
             }
           }
         });
  return out;
}

Tensor scale(Tape& t, const Tensor& a, double c) {
  const int64_t n = a.shape().numel();
  Tensor out = Tensor::uninit(a.shape());
  ker::vscale(a.value().data(), c, out.value().data(), n);
  attach(t, out, a.requires_grad(), [ap = a.ptr(), self = out.data(), c, n]() {
    if (ap->requires_grad) ker::vaxpy(c, self->grad.data(), ap->grad_data(), n);
  });
  return out;
}

Tensor add_const(Tape& t, const Tensor& a, double c) {
  const int64_t n = a.shape().numel();
  Tensor out = Tensor::uninit(a.shape());
  const double* av = a.value().data();
  double* ov = out.value().data();
  for (int64_t i = 0; i < n; ++i) ov[i] = av[i] + c;
  attach(t, out, a.requires_grad(), [ap = a.ptr(), self = out.data(), n]() {
    if (ap->requires_grad)
      ker::vaxpy(1.0, self->grad.data(), ap->grad_data(), n);
  });
  return out;
}

Tensor neg(Tape& t, const Tensor& a) { return scale(t, a, -1.0); }

Tensor exp(Tape& t, const Tensor& a) {
  const int64_t n = a.shape().numel();
  Tensor out = Tensor::uninit(a.shape());
  ker::vexp(a.value().data(), out.value().data(), n);
  attach(t, out, a.requires_grad(), [ap = a.ptr(), self = out.data(), n]() {
    if (ap->requires_grad)
      ker::vfma(self->grad.data(), self->value.data(), ap->grad_data(), n, true);
  });
  return out;
}

Tensor tanh(Tape& t, const Tensor& a) {
  const int64_t n = a.shape().numel();
  Tensor out = Tensor::uninit(a.shape());
  ker::vtanh(a.value().data(), out.value().data(), n);
  attach(t, out, a.requires_grad(), [ap = a.ptr(), self = out.data(), n]() {
    if (ap->requires_grad)
      ker::tanh_bwd(self->value.data(), self->grad.data(), ap->grad_data(), n,
                    true);
  });
  return out;
}

Tensor sigmoid(Tape& t, const Tensor& a) {
  const int64_t n = a.shape().numel();
  Tensor out = Tensor::uninit(a.shape());
  ker::vsigmoid(a.value().data(), out.value().data(), n);
  attach(t, out, a.requires_grad(), [ap = a.ptr(), self = out.data(), n]() {
    if (ap->requires_grad)
      ker::sigmoid_bwd(self->value.data(), self->grad.data(), ap->grad_data(), n,
                       true);
  });
  return out;
}

Tensor leaky_relu(Tape& t, const Tensor& a, double slope) {
  const int64_t n = a.shape().numel();
  Tensor out = Tensor::uninit(a.shape());
  ker::leaky_relu(a.value().data(), out.value().data(), n, slope);
  attach(t, out, a.requires_grad(),
         [ap = a.ptr(), self = out.data(), n, slope]() {
           if (ap->requires_grad)
             ker::leaky_relu_bwd(ap->value.data(), self->grad.data(),
                                 ap->grad_data(), n, slope, true);
         });
  return out;
}

namespace {

struct LseLayout {
  // over_last: reduce each contiguous row (groups = product of leading dims).
  // Otherwise reduce down the rows of `blocks` matrices of rows×cols.
  bool over_last;
  int64_t groups = 0, len = 0;          // over_last
  int64_t blocks = 0, rows = 0, cols = 0;  // !over_last
  Shape out_shape;
};

LseLayout lse_layout(const Shape& s, int dim, bool keepdims) {
  LseLayout l{};
  if (s.rank == 1) {
    if (dim != 0) throw ShapeError("logsumexp: dim out of range for " + s.str());
    l.over_last = true;
    l.groups = 1;
    l.len = s[0];
    l.out_shape = Shape::vec(1);
    return l;
  }
  if (s.rank == 2) {
    if (dim == 1) {
      l.over_last = true;
      l.groups = s[0];
      l.len = s[1];
      l.out_shape = keepdims ? Shape::mat(s[0], 1) : Shape::vec(s[0]);
    } else if (dim == 0) {
      l.over_last = false;
      l.blocks = 1;
      l.rows = s[0];
      l.cols = s[1];
      l.out_shape = keepdims ? Shape::mat(1, s[1]) : Shape::vec(s[1]);
    } else {
      throw ShapeError("logsumexp: dim out of range for " + s.str());
    }
    return l;
  }
  if (s.rank == 3) {
    if (dim == 2) {
      l.over_last = true;
      l.groups = s[0] * s[1];
      l.len = s[2];
      l.out_shape = keepdims ? Shape::cube(s[0], s[1], 1) : Shape::mat(s[0], s[1]);
    } else if (dim == 1) {
      l.over_last = false;
      l.blocks = s[0];
      l.rows = s[1];
      l.cols = s[2];
      l.out_shape = keepdims ? Shape::cube(s[0], 1, s[2]) : Shape::mat(s[0], s[2]);
    } else {
      throw ShapeError("logsumexp: dim out of range for " + s.str());
    }
    return l;
  }
  throw ShapeError("logsumexp: unsupported rank for " + s.str());
}

}  // namespace

Tensor logsumexp(Tape& t, const Tensor& a, int dim, bool keepdims) {
  const LseLayout l = lse_layout(a.shape(), dim, keepdims);
  Tensor out = Tensor::uninit(l.out_shape);
  double* ov = out.value().data();
  const double* av = a.value().data();
  if (l.over_last) {
    std::vector<double> mx(l.groups), se(l.groups);
    ker::row_max(av, l.groups, l.len, mx.data());
    ker::row_sumexp(av, mx.data(), se.data(), l.groups, l.len);
    for (int64_t i = 0; i < l.groups; ++i) ov[i] = mx[i] + std::log(se[i]);
  } else {
    std::vector<double> mx(l.cols), se(l.cols);
    for (int64_t q = 0; q < l.blocks; ++q) {
      const double* aq = av + q * l.rows * l.cols;
      ker::col_max(aq, l.rows, l.cols, mx.data());
      ker::col_sumexp(aq, mx.data(), se.data(), l.rows, l.cols);
      for (int64_t j = 0; j < l.cols; ++j)
        ov[q * l.cols + j] = mx[j] + std::log(se[j]);
    }
  }
  attach(t, out, a.requires_grad(), [ap = a.ptr(), self = out.data(), l]() {
    if (!ap->requires_grad) return;
    const double* g = self->grad.data();
    const double* lse = self->value.data();
    double* dx = ap->grad_data();
    if (l.over_last) {
      ker::row_softmax_scaled(ap->value.data(), lse, g, dx, l.groups, l.len,
                              true);
    } else {
      for (int64_t q = 0; q < l.blocks; ++q) {
        const int64_t off = q * l.rows * l.cols;
        ker::col_softmax_scaled(ap->value.data() + off, lse + q * l.cols,
                                g + q * l.cols, dx + off, l.rows, l.cols,
                                true);
      }
    }
  });
  return out;
}

Tensor transpose(Tape& t, const Tensor& a) {
  if (a.shape().rank != 2)
    throw ShapeError("transpose: need rank-2, got " + a.shape().str());
  const int64_t r = a.shape()[0], c = a.shape()[1];
  Tensor out = Tensor::uninit(Shape::mat(c, r));
  const double* av = a.value().data();
  double* ov = out.value().data();
  for (int64_t i = 0; i < r; ++i)
    for (int64_t j = 0; j < c; ++j) ov[j * r + i] = av[i * c + j];
  attach(t, out, a.requires_grad(), [ap = a.ptr(), self = out.data(), r, c]() {
    if (!ap->requires_grad) return;
    const double* g = self->grad.data();
    double* dx = ap->grad_data();
    for (int64_t i = 0; i < r; ++i)
      for (int64_t j = 0; j < c; ++j) dx[i * c + j] += g[j * r + i];
  });
  return out;
}

Tensor transpose01(Tape& t, const Tensor& a) {
  if (a.shape().rank != 3)
    throw ShapeError("transpose01: need rank-3, got " + a.shape().str());
  const int64_t d0 = a.shape()[0], d1 = a.shape()[1], d2 = a.shape()[2];
  Tensor out = Tensor::uninit(Shape::cube(d1, d0, d2));
  const double* av = a.value().data();
  double* ov = out.value().data();
  for (int64_t i = 0; i < d0; ++i)
    for (int64_t j = 0; j < d1; ++j)
      std::memcpy(ov + (j * d0 + i) * d2, av + (i * d1 + j) * d2,
                  sizeof(double) * d2);
  attach(t, out, a.requires_grad(),
         [ap = a.ptr(), self = out.data(), d0, d1, d2]() {
           if (!ap->requires_grad) return;
           const double* g = self->grad.data();
           double* dx = ap->grad_data();
           for (int64_t i = 0; i < d0; ++i)
             for (int64_t j = 0; j < d1; ++j)
               ker::vaxpy(1.0, g + (j * d0 + i) * d2, dx + (i * d1 + j) * d2,
                          d2);
         });
  return out;
}

Tensor reshape(Tape& t, const Tensor& a, Shape s) {
  if (s.numel() != a.shape().numel())
    throw ShapeError("reshape: numel mismatch " + a.shape().str() + " -> " +
                     s.str());
  Tensor out = Tensor::uninit(s);
  std::memcpy(out.value().data(), a.value().data(),
              sizeof(double) * a.value().size());
  attach(t, out, a.requires_grad(), [ap = a.ptr(), self = out.data()]() {
    if (ap->requires_grad)
      ker::vaxpy(1.0, self->grad.data(), ap->grad_data(),
                 static_cast<int64_t>(self->value.size()));
  });
  return out;
}

Tensor slice_time(Tape& t, const Tensor& a, int64_t step) {
  if (a.shape().rank != 3)
    throw ShapeError("slice_time: need rank-3, got " + a.shape().str());
  const int64_t T = a.shape()[0], B = a.shape()[1], D = a.shape()[2];
  if (step < 0 || step >= T)
    throw ShapeError("slice_time: step " + std::to_string(step) +
                     " out of range for " + a.shape().str());
  const int64_t block = B * D;
  Tensor out = Tensor::uninit(Shape::mat(B, D));
  std::memcpy(out.value().data(), a.value().data() + step * block,
              sizeof(double) * block);
  attach(t, out, a.requires_grad(),
         [ap = a.ptr(), self = out.data(), step, block]() {
           if (ap->requires_grad)
             ker::vaxpy(1.0, self->grad.data(), ap->grad_data() + step * block,
                        block);
         });
  return out;
}

Tensor stack_time(Tape& t, const std::vector<Tensor>& steps) {
  if (steps.empty()) throw ShapeError("stack_time: empty sequence");
  const Shape s0 = steps[0].shape();
  if (s0.rank != 2) throw ShapeError("stack_time: steps must be rank-2");
  const int64_t T = static_cast<int64_t>(steps.size());
  const int64_t block = s0.numel();
  Tensor out = Tensor::uninit(Shape::cube(T, s0[0], s0[1]));
  bool any_rg = false;
  for (int64_t i = 0; i < T; ++i) {
    check_same_shape(steps[i], steps[0], "stack_time");
    std::memcpy(out.value().data() + i * block, steps[i].value().data(),
                sizeof(double) * block);
    any_rg = any_rg || steps[i].requires_grad();
  }
  std::vector<TensorPtr> parts;
  parts.reserve(steps.size());
  for (const auto& s : steps) parts.push_back(s.ptr());
  attach(t, out, any_rg,
         [parts = std::move(parts), self = out.data(), block]() {
           const double* g = self->grad.data();
           for (size_t i = 0; i < parts.size(); ++i)
             if (parts[i]->requires_grad)
               ker::vaxpy(1.0, g + i * block, parts[i]->grad_data(), block);
         });
  return out;
}

Tensor reverse_time(Tape& t, const Tensor& a) {
  if (a.shape().rank != 3)
    throw ShapeError("reverse_time: need rank-3, got " + a.shape().str());
  const int64_t T = a.shape()[0];
  const int64_t block = a.shape()[1] * a.shape()[2];
  Tensor out = Tensor::uninit(a.shape());
  for (int64_t i = 0; i < T; ++i)
    std::memcpy(out.value().data() + (T - 1 - i) * block,
                a.value().data() + i * block, sizeof(double) * block);
  attach(t, out, a.requires_grad(), [ap = a.ptr(), self = out.data(), T, block]() {
    if (!ap->requires_grad) return;
    const double* g = self->grad.data();
    for (int64_t i = 0; i < T; ++i)
      ker::vaxpy(1.0, g + (T - 1 - i) * block, ap->grad_data() + i * block,
                 block);
  });
  return out;
}

Tensor concat_cols(Tape& t, const Tensor& a, const Tensor& b) {
  if (a.shape().rank != 2 || b.shape().rank != 2 ||
      a.shape()[0] != b.shape()[0])
    throw ShapeError("concat_cols: incompatible " + a.shape().str() + " and " +
                     b.shape().str());
  const int64_t r = a.shape()[0], ca = a.shape()[1], cb = b.shape()[1];
  Tensor out = Tensor::uninit(Shape::mat(r, ca + cb));
  for (int64_t i = 0; i < r; ++i) {
    std::memcpy(out.value().data() + i * (ca + cb),
                a.value().data() + i * ca, sizeof(double) * ca);
    std::memcpy(out.value().data() + i * (ca + cb) + ca,
                b.value().data() + i * cb, sizeof(double) * cb);
  }
  attach(t, out, a.requires_grad() || b.requires_grad(),
         [ap = a.ptr(), bp = b.ptr(), self = out.data(), r, ca, cb]() {
           const double* g = self->grad.data();
           for (int64_t i = 0; i < r; ++i) {
             if (ap->requires_grad)
               ker::vaxpy(1.0, g + i * (ca + cb), ap->grad_data() + i * ca,
                          ca);
             if (bp->requires_grad)
               ker::vaxpy(1.0, g + i * (ca + cb) + ca,
                          bp->grad_data() + i * cb, cb);
           }
         });
  return out;
}

Tensor slice_cols(Tape& t, const Tensor& a, int64_t c0, int64_t c1) {
  if (a.shape().rank != 2 || c0 < 0 || c1 > a.shape()[1] || c0 >= c1)
    throw ShapeError("slice_cols: bad range on " + a.shape().str());
  const int64_t r = a.shape()[0], c = a.shape()[1], w = c1 - c0;
  Tensor out = Tensor::uninit(Shape::mat(r, w));
  for (int64_t i = 0; i < r; ++i)
    std::memcpy(out.value().data() + i * w, a.value().data() + i * c + c0,
                sizeof(double) * w);
  attach(t, out, a.requires_grad(),
         [ap = a.ptr(), self = out.data(), r, c, c0, w]() {
           if (!ap->requires_grad) return;
           const double* g = self->grad.data();
           for (int64_t i = 0; i < r; ++i)
             ker::vaxpy(1.0, g + i * w, ap->grad_data() + i * c + c0, w);
         });
  return out;
}

Tensor slice_rows(Tape& t, const Tensor& a, int64_t r0, int64_t r1) {
  if (a.shape().rank != 2 || r0 < 0 || r1 > a.shape()[0] || r0 >= r1)
    throw ShapeError("slice_rows: bad range on " + a.shape().str());
  const int64_t c = a.shape()[1], h = r1 - r0;
  Tensor out = Tensor::uninit(Shape::mat(h, c));
  std::memcpy(out.value().data(), a.value().data() + r0 * c,
              sizeof(double) * h * c);
  attach(t, out, a.requires_grad(), [ap = a.ptr(), self = out.data(), r0, c, h]() {
    if (ap->requires_grad)
      ker::vaxpy(1.0, self->grad.data(), ap->grad_data() + r0 * c, h * c);
  });
  return out;
}

Tensor sum_all(Tape& t, const Tensor& a) {
  const int64_t n = a.shape().numel();
  Tensor out = Tensor::from(Shape::vec(1), {ker::vsum(a.value().data(), n)});
  attach(t, out, a.requires_grad(), [ap = a.ptr(), self = out.data(), n]() {
    if (!ap->requires_grad) return;
    const double g = self->grad[0];
    double* dx = ap->grad_data();
    for (int64_t i = 0; i < n; ++i) dx[i] += g;
  });
  return out;
}

Tensor mean_all(Tape& t, const Tensor& a) {
  const int64_t n = a.shape().numel();
  Tensor out =
      Tensor::from(Shape::vec(1), {ker::vsum(a.value().data(), n) / n});
  attach(t, out, a.requires_grad(), [ap = a.ptr(), self = out.data(), n]() {
    if (!ap->requires_grad) return;
    const double g = self->grad[0] / n;
    double* dx = ap->grad_data();
    for (int64_t i = 0; i < n; ++i) dx[i] += g;
  });
  return out;
}

Tensor rowsum(Tape& t, const Tensor& a) {
  if (a.shape().rank != 2)
    throw ShapeError("rowsum: need rank-2, got " + a.shape().str());
  const int64_t r = a.shape()[0], c = a.shape()[1];
  Tensor out = Tensor::uninit(Shape::mat(r, 1));
  for (int64_t i = 0; i < r; ++i)
    out.value()[i] = ker::vsum(a.value().data() + i * c, c);
  attach(t, out, a.requires_grad(), [ap = a.ptr(), self = out.data(), r, c]() {
    if (!ap->requires_grad) return;
    const double* g = self->grad.data();
    double* dx = ap->grad_data();
    for (int64_t i = 0; i < r; ++i)
      for (int64_t j = 0; j < c; ++j) dx[i * c + j] += g[i];
  });
  return out;
}

Tensor mse(Tape& t, const Tensor& a, const Tensor& b) {
  Tensor d = sub(t, a, b);
  return mean_all(t, mul(t, d, d));
}

Tensor affine(Tape& t, const Tensor& x, const Tensor& w, const Tensor& b) {
  return add_rowvec(t, matmul(t, x, w), b);
}

}  // namespace spg::ad
