#include "spg/batchnorm.hpp"

#include <cmath>

#include "spg/kernels.hpp"

namespace spg::ad {

namespace ker = spg::kernels;

Tensor batchnorm(Tape& t, const Tensor& x, BatchNorm& state, BnMode mode) {
  if (x.shape().rank != 2)
    throw ShapeError("batchnorm: need rank-2 input, got " + x.shape().str());
  const int64_t rows = x.shape()[0], cols = x.shape()[1];
  if (cols != state.features)
    throw ShapeError("batchnorm: feature width " + std::to_string(cols) +
                     " vs state " + std::to_string(state.features));
  const bool train = mode != BnMode::kEval;
  if (train && rows < 2)
    throw ShapeError("batchnorm: training batch of 1 has undefined variance");

  std::vector<double> mean(cols), inv_std(cols);
  if (train) {
    ker::col_sum(x.value().data(), rows, cols, mean.data());
    for (int64_t j = 0; j < cols; ++j) mean[j] /= static_cast<double>(rows);
    std::vector<double> var(cols, 0.0);
    for (int64_t i = 0; i < rows; ++i) {
      const double* row = x.value().data() + i * cols;
      for (int64_t j = 0; j < cols; ++j) {
        double d = row[j] - mean[j];
        var[j] += d * d;
      }
    }
    for (int64_t j = 0; j < cols; ++j) var[j] /= static_cast<double>(rows);
    for (int64_t j = 0; j < cols; ++j)
      inv_std[j] = 1.0 / std::sqrt(var[j] + state.eps);
    if (mode == BnMode::kTrain) {
      const double m = state.momentum;
      const double unbias =
          rows > 1 ? static_cast<double>(rows) / static_cast<double>(rows - 1)
                   : 1.0;
      for (int64_t j = 0; j < cols; ++j) {
        state.running_mean[j] = (1.0 - m) * state.running_mean[j] + m * mean[j];
        state.running_var[j] =
            (1.0 - m) * state.running_var[j] + m * var[j] * unbias;
      }
    }
  } else {
    mean = state.running_mean;
    for (int64_t j = 0; j < cols; ++j)
      inv_std[j] = 1.0 / std::sqrt(state.running_var[j] + state.eps);
  }

  Tensor out = Tensor::uninit(x.shape());
  ker::bn_forward(x.value().data(), mean.data(), inv_std.data(),
                  state.gamma.value().data(), state.beta.value().data(),
                  out.value().data(), rows, cols);

  const bool any_rg =
      x.requires_grad() || state.gamma.requires_grad() ||
      state.beta.requires_grad();
  if (!(t.recording() && any_rg)) return out;

  // xhat is needed by every backward path; keep a copy in the closure.
  std::vector<double> xhat(static_cast<size_t>(rows * cols));
  for (int64_t i = 0; i < rows; ++i) {
    const double* row = x.value().data() + i * cols;
    double* hrow = xhat.data() + i * cols;
    for (int64_t j = 0; j < cols; ++j)
      hrow[j] = (row[j] - mean[j]) * inv_std[j];
  }

  out.set_requires_grad(true);
  out.data()->backward_fn = [xp = x.ptr(), gp = state.gamma.ptr(),
                             bp = state.beta.ptr(), self = out.data(),
                             xhat = std::move(xhat),
                             inv_std = std::move(inv_std), rows, cols,
                             train]() {
    const double* g = self->grad.data();
    std::vector<double> gsum(cols), gxsum(cols, 0.0);
    ker::col_sum(g, rows, cols, gsum.data());
    for (int64_t i = 0; i < rows; ++i) {
      const double* grow = g + i * cols;
      const double* hrow = xhat.data() + i * cols;
      for (int64_t j = 0; j < cols; ++j) gxsum[j] += grow[j] * hrow[j];
    }
    if (bp->requires_grad)
      ker::vaxpy(1.0, gsum.data(), bp->grad_data(), cols);
    if (gp->requires_grad)
      ker::vaxpy(1.0, gxsum.data(), gp->grad_data(), cols);
    if (xp->requires_grad) {
      std::vector<double> gis(cols), gmean(cols), gxmean(cols);
      for (int64_t j = 0; j < cols; ++j) {
        gis[j] = gp->value[j] * inv_std[j];
        if (train) {
          gmean[j] = gsum[j] / static_cast<double>(rows);
          gxmean[j] = gxsum[j] / static_cast<double>(rows);
        } else {
          // Eval statistics are constants; only the direct path remains.
          gmean[j] = 0.0;
          gxmean[j] = 0.0;
        }
      }
      ker::bn_backward_dx(xhat.data(), g, gmean.data(), gxmean.data(),
                          gis.data(), xp->grad_data(), rows, cols, true);
    }
  };
  t.record(out);
  return out;
}

}  // namespace spg::ad
