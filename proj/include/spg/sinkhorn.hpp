#pragma once

// Temperature-controlled Sinkhorn layer, computed entirely in log space:
// divide logits by τ, then L rounds of row-then-column logsumexp
// subtraction, then exponentiate and add a small offset. Differentiable
// through the tape; accepts a single N×N matrix or a batch B×N×N.

#include "spg/ops.hpp"
#include "spg/tensor.hpp"

namespace spg::ad {

Tensor sinkhorn(Tape& t, const Tensor& logits, double tau, int iters,
                double eps_offset = 1e-6);

}  // namespace spg::ad
