#pragma once

// Adam with bias correction, plus global-norm gradient clipping. Parameters
// are leaf tensors; a missing grad buffer counts as all-zero.

#include <vector>

#include "spg/tensor.hpp"

namespace spg::ad {

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int64_t t = 0;
  std::vector<std::vector<double>> m, v;

  void init_like(const std::vector<Tensor>& params);
  bool initialized() const { return !m.empty(); }
};

// Throws NumericError if any grad is non-finite (training aborts).
void adam_step(std::vector<Tensor>& params, AdamState& state, double lr);

double grad_norm(const std::vector<Tensor>& params);

// Scales all grads by max_norm/norm when norm exceeds max_norm; returns the
// pre-clip norm.
double clip_grad_norm(std::vector<Tensor>& params, double max_norm = 1.0);

void zero_grads(std::vector<Tensor>& params);

}  // namespace spg::ad
