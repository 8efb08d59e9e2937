#pragma once

// GRU layer built from tape primitives. Gate order in the 3H axis is
// [reset | update | candidate]; the reset gate multiplies the hidden
// projection inside the candidate (standard formulation, two bias sets):
//   r = σ(x·W_ir + b_ir + h·W_hr + b_hr)
//   z = σ(x·W_iz + b_iz + h·W_hz + b_hz)
//   n = tanh(x·W_in + b_in + r ⊙ (h·W_hn + b_hn))
//   h' = (1 − z) ⊙ n + z ⊙ h

#include <vector>

#include "spg/ops.hpp"
#include "spg/tensor.hpp"

namespace spg::ad {

struct GruParams {
  int64_t d_in = 0, d_h = 0;
  Tensor w_ih;  // d_in × 3H
  Tensor w_hh;  // H × 3H
  Tensor b_ih;  // 3H
  Tensor b_hh;  // 3H

  // Weights uniform in ±1/√fan_in, biases zero.
  static GruParams init(int64_t d_in, int64_t d_h, Rng& rng,
                        bool requires_grad = true);
  std::vector<Tensor> params() const { return {w_ih, w_hh, b_ih, b_hh}; }
  int64_t param_count() const { return 3 * (d_in * d_h + d_h * d_h + 2 * d_h); }
};

// seq is time-major T×B×d_in, h0 is B×H; returns all step outputs T×B×H.
Tensor gru_forward(Tape& t, const Tensor& seq, const Tensor& h0,
                   const GruParams& p);

// Concatenates forward and time-reversed passes per step: T×B×2H.
Tensor bigru_forward(Tape& t, const Tensor& seq, const Tensor& h0_fwd,
                     const Tensor& h0_bwd, const GruParams& fwd,
                     const GruParams& bwd);

// Single-sequence convenience: seq T×d_in, h0 of length H; returns T×H or
// T×2H when a backward-direction parameter set is supplied.
Tensor gru_forward(Tape& t, const Tensor& seq, const Tensor& h0,
                   const GruParams& fwd, const GruParams* bwd);

}  // namespace spg::ad
