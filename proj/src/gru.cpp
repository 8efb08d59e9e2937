#include "spg/gru.hpp"

#include <cmath>

#include "spg/kernels.hpp"

namespace spg::ad {

namespace {

namespace ker = spg::kernels;

// One fused GRU cell: consumes the precomputed input projection xpt and
// hidden projection hp (both B×3H, gate order [r|z|n]) plus the previous
// hidden state, emits the next hidden state as a single tape node. Gate
// activations are kept for the backward pass.
Tensor gru_cell(Tape& t, const Tensor& xpt, const Tensor& hp,
                const Tensor& hprev) {
  const int64_t b = hprev.shape()[0], h = hprev.shape()[1];
  const int64_t g3 = 3 * h;
  Tensor out = Tensor::uninit(Shape::mat(b, h));

  auto r = std::make_shared<std::vector<double>>(b * h);
  auto z = std::make_shared<std::vector<double>>(b * h);
  auto n = std::make_shared<std::vector<double>>(b * h);
  {
    std::vector<double> pre(b * h);
    const double* xv = xpt.value().data();
    const double* hv = hp.value().data();
    const double* pv = hprev.value().data();
    for (int64_t i = 0; i < b; ++i)
      for (int64_t j = 0; j < h; ++j)
        pre[i * h + j] = xv[i * g3 + j] + hv[i * g3 + j];
    ker::vsigmoid(pre.data(), r->data(), b * h);
    for (int64_t i = 0; i < b; ++i)
      for (int64_t j = 0; j < h; ++j)
        pre[i * h + j] = xv[i * g3 + h + j] + hv[i * g3 + h + j];
    ker::vsigmoid(pre.data(), z->data(), b * h);
    for (int64_t i = 0; i < b; ++i)
      for (int64_t j = 0; j < h; ++j)
        pre[i * h + j] =
            xv[i * g3 + 2 * h + j] + (*r)[i * h + j] * hv[i * g3 + 2 * h + j];
    ker::vtanh(pre.data(), n->data(), b * h);
    double* ov = out.value().data();
    for (int64_t i = 0; i < b * h; ++i)
      ov[i] = (*n)[i] + (*z)[i] * (pv[i] - (*n)[i]);
  }

  const bool rg = t.recording() && (xpt.requires_grad() ||
                                    hp.requires_grad() ||
                                    hprev.requires_grad());
  if (rg) {
    out.set_requires_grad(true);
    out.data()->backward_fn = [xp = xpt.ptr(), hpp = hp.ptr(),
                               pp = hprev.ptr(), self = out.data(), r, z, n,
                               b, h, g3]() {
      const double* g = self->grad.data();
      const double* hv = hpp->value.data();
      const double* pv = pp->value.data();
      double* dx = xp->requires_grad ? xp->grad_data() : nullptr;
      double* dh = hpp->requires_grad ? hpp->grad_data() : nullptr;
      double* dp = pp->requires_grad ? pp->grad_data() : nullptr;
      for (int64_t i = 0; i < b; ++i) {
        for (int64_t j = 0; j < h; ++j) {
          const int64_t idx = i * h + j;
          const int64_t row = i * g3 + j;
          const double rv = (*r)[idx], zv = (*z)[idx], nv = (*n)[idx];
          const double gv = g[idx];
          const double dz_pre = gv * (pv[idx] - nv) * zv * (1.0 - zv);
          const double dn_pre = gv * (1.0 - zv) * (1.0 - nv * nv);
          const double dr_pre =
              dn_pre * hv[row + 2 * h] * rv * (1.0 - rv);
          if (dx) {
            dx[row] += dr_pre;
            dx[row + h] += dz_pre;
            dx[row + 2 * h] += dn_pre;
          }
          if (dh) {
            dh[row] += dr_pre;
            dh[row + h] += dz_pre;
            dh[row + 2 * h] += dn_pre * rv;
          }
          if (dp) dp[idx] += gv * zv;
        }
      }
    };
    t.record(out);
  }
  return out;
}

}  // namespace

GruParams GruParams::init(int64_t d_in, int64_t d_h, Rng& rng,
                          bool requires_grad) {
  GruParams p;
  p.d_in = d_in;
  p.d_h = d_h;
  const double bound_i = 1.0 / std::sqrt(static_cast<double>(d_in));
  const double bound_h = 1.0 / std::sqrt(static_cast<double>(d_h));
  p.w_ih = Tensor::uniform(Shape::mat(d_in, 3 * d_h), -bound_i, bound_i, rng,
                           requires_grad);
  p.w_hh = Tensor::uniform(Shape::mat(d_h, 3 * d_h), -bound_h, bound_h, rng,
                           requires_grad);
  p.b_ih = Tensor::zeros(Shape::vec(3 * d_h), requires_grad);
  p.b_hh = Tensor::zeros(Shape::vec(3 * d_h), requires_grad);
  return p;
}

Tensor gru_forward(Tape& t, const Tensor& seq, const Tensor& h0,
                   const GruParams& p) {
  if (seq.shape().rank != 3)
    throw ShapeError("gru_forward: sequence must be T×B×d_in, got " +
                     seq.shape().str());
  const int64_t T = seq.shape()[0], B = seq.shape()[1], D = seq.shape()[2];
  const int64_t H = p.d_h;
  if (D != p.d_in)
    throw ShapeError("gru_forward: input width " + std::to_string(D) +
                     " vs params d_in " + std::to_string(p.d_in));
  if (!(h0.shape() == Shape::mat(B, H)))
    throw ShapeError("gru_forward: h0 shape " + h0.shape().str() +
                     " vs expected (" + std::to_string(B) + "x" +
                     std::to_string(H) + ")");

  // One big input projection for all steps, then sliced per step.
  Tensor xs = reshape(t, seq, Shape::mat(T * B, D));
  Tensor xp = affine(t, xs, p.w_ih, p.b_ih);
  Tensor xp3 = reshape(t, xp, Shape::cube(T, B, 3 * H));

  std::vector<Tensor> outs;
  outs.reserve(T);
  Tensor h = h0;
  for (int64_t step = 0; step < T; ++step) {
    Tensor xpt = slice_time(t, xp3, step);
    Tensor hp = affine(t, h, p.w_hh, p.b_hh);
    h = gru_cell(t, xpt, hp, h);
    outs.push_back(h);
  }
  return stack_time(t, outs);
}

Tensor bigru_forward(Tape& t, const Tensor& seq, const Tensor& h0_fwd,
                     const Tensor& h0_bwd, const GruParams& fwd,
                     const GruParams& bwd) {
  Tensor out_f = gru_forward(t, seq, h0_fwd, fwd);
  Tensor out_b_rev = gru_forward(t, reverse_time(t, seq), h0_bwd, bwd);
  Tensor out_b = reverse_time(t, out_b_rev);
  const int64_t T = seq.shape()[0], B = seq.shape()[1];
  const int64_t H = fwd.d_h;
  Tensor f2 = reshape(t, out_f, Shape::mat(T * B, H));
  Tensor b2 = reshape(t, out_b, Shape::mat(T * B, bwd.d_h));
  Tensor cat = concat_cols(t, f2, b2);
  return reshape(t, cat, Shape::cube(T, B, H + bwd.d_h));
}

Tensor gru_forward(Tape& t, const Tensor& seq, const Tensor& h0,
                   const GruParams& fwd, const GruParams* bwd) {
  if (seq.shape().rank != 2)
    throw ShapeError("gru_forward: single sequence must be T×d_in, got " +
                     seq.shape().str());
  const int64_t T = seq.shape()[0], D = seq.shape()[1];
  Tensor seq3 = reshape(t, seq, Shape::cube(T, 1, D));
  Tensor h0m = reshape(t, h0, Shape::mat(1, h0.shape().numel()));
  Tensor out;
  if (bwd) {
    out = bigru_forward(t, seq3, h0m, h0m, fwd, *bwd);
    return reshape(t, out, Shape::mat(T, fwd.d_h + bwd->d_h));
  }
  out = gru_forward(t, seq3, h0m, fwd);
  return reshape(t, out, Shape::mat(T, fwd.d_h));
}

}  // namespace spg::ad
