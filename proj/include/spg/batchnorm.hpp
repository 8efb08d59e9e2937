#pragma once

// Feature-wise batch normalization over the rows of an R×C input. Training
// modes normalize by biased batch statistics; running stats hold the
// exponentially weighted unbiased variance (momentum 0.1) and are consulted
// in eval mode. kTrainNoUpdate normalizes by batch statistics without
// touching the running buffers — used by actor updates through the critic so
// the critic's eval statistics only ever come from critic-loss passes.

#include <vector>

#include "spg/ops.hpp"
#include "spg/tensor.hpp"

namespace spg::ad {

enum class BnMode { kTrain, kTrainNoUpdate, kEval };

struct BatchNorm {
  int64_t features = 0;
  double eps = 1e-5;
  double momentum = 0.1;
  Tensor gamma, beta;  // trainable scale/shift
  std::vector<double> running_mean, running_var;

  explicit BatchNorm(int64_t features_, bool requires_grad = true)
      : features(features_),
        gamma(Tensor::full(Shape::vec(features_), 1.0, requires_grad)),
        beta(Tensor::zeros(Shape::vec(features_), requires_grad)),
        running_mean(features_, 0.0),
        running_var(features_, 1.0) {}

  std::vector<Tensor> params() const { return {gamma, beta}; }
};

Tensor batchnorm(Tape& t, const Tensor& x, BatchNorm& state, BnMode mode);

}  // namespace spg::ad
