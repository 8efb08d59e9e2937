#pragma once

// Differentiable tensor ops. Every op validates shapes, computes its value
// through the kernel layer, and (on a recording tape, when any input requires
// grad) registers a backward closure that accumulates into input grads.
//
// Sequence tensors use the time-major layout T×B×D so per-step slices are
// contiguous.

#include <vector>

#include "spg/tensor.hpp"

namespace spg::ad {

Tensor matmul(Tape& t, const Tensor& a, const Tensor& b);
// a: B×m×k, b: B×n×k; per batch entry C_q = A_q · B_qᵀ → B×m×n.
Tensor bmm_nt(Tape& t, const Tensor& a, const Tensor& b);

Tensor add(Tape& t, const Tensor& a, const Tensor& b);
Tensor sub(Tape& t, const Tensor& a, const Tensor& b);
Tensor mul(Tape& t, const Tensor& a, const Tensor& b);
Tensor add_rowvec(Tape& t, const Tensor& a, const Tensor& v);  // R×C + (C)
// a minus a keepdims reduction of itself: rank-2 R×C − (R×1 | 1×C),
// rank-3 B×R×C − (B×R×1 | B×1×C).
Tensor sub_bcast(Tape& t, const Tensor& a, const Tensor& r);
Tensor scale(Tape& t, const Tensor& a, double c);
Tensor add_const(Tape& t, const Tensor& a, double c);
Tensor neg(Tape& t, const Tensor& a);

Tensor exp(Tape& t, const Tensor& a);
Tensor tanh(Tape& t, const Tensor& a);
Tensor sigmoid(Tape& t, const Tensor& a);
Tensor leaky_relu(Tape& t, const Tensor& a, double slope = 0.01);

// log Σ exp along dim with max-subtraction. rank-1: dim 0; rank-2: dim 0|1;
// rank-3: dim 1|2.
Tensor logsumexp(Tape& t, const Tensor& a, int dim, bool keepdims);

Tensor transpose(Tape& t, const Tensor& a);    // rank-2
Tensor transpose01(Tape& t, const Tensor& a);  // rank-3, swap dims 0 and 1
Tensor reshape(Tape& t, const Tensor& a, Shape s);
Tensor slice_time(Tape& t, const Tensor& a, int64_t step);  // T×B×D → B×D
Tensor stack_time(Tape& t, const std::vector<Tensor>& steps);
Tensor reverse_time(Tape& t, const Tensor& a);
Tensor concat_cols(Tape& t, const Tensor& a, const Tensor& b);
Tensor slice_cols(Tape& t, const Tensor& a, int64_t c0, int64_t c1);
Tensor slice_rows(Tape& t, const Tensor& a, int64_t r0, int64_t r1);

Tensor sum_all(Tape& t, const Tensor& a);   // → (1)
Tensor mean_all(Tape& t, const Tensor& a);  // → (1)
Tensor rowsum(Tape& t, const Tensor& a);    // R×C → R×1

// mean((a−b)²), scalar.
Tensor mse(Tape& t, const Tensor& a, const Tensor& b);
// x·W + b broadcast over rows.
Tensor affine(Tape& t, const Tensor& x, const Tensor& w, const Tensor& b);

}  // namespace spg::ad
