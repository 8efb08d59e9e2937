#pragma once

// Shared test helpers: finite-difference gradient checking and small
// reference oracles kept independent of the implementation paths they check.

#include <cmath>
#include <functional>
#include <vector>

#include "spg/rng.hpp"
#include "spg/tensor.hpp"

namespace spgtest {

// Relative error with a tiny-gradient escape: values where both sides are
// below `tiny` are treated as matching (finite differences drown in roundoff
// there).
inline double rel_err(double a, double b, double tiny = 1e-6) {
  const double scale = std::max(std::fabs(a), std::fabs(b));
  if (scale < tiny) return 0.0;
  return std::fabs(a - b) / scale;
}

// Central finite differences of a scalar function against the analytic grads
// stored on `params` (call after backward). Returns the max relative error.
// max_per_tensor = 0 checks every coordinate; otherwise a deterministic
// strided subsample of that many coordinates per tensor (first and last
// always included).
inline double fd_check(const std::function<double()>& value_fn,
                       std::vector<spg::ad::Tensor> params,
                       double step = 1e-5, size_t max_per_tensor = 0) {
  double worst = 0.0;
  for (auto& p : params) {
    auto& vals = p.value();
    const size_t n = vals.size();
    size_t stride = 1;
    if (max_per_tensor > 0 && n > max_per_tensor)
      stride = (n + max_per_tensor - 1) / max_per_tensor;
    auto probe = [&](size_t i) {
      const double saved = vals[i];
      vals[i] = saved + step;
      const double up = value_fn();
      vals[i] = saved - step;
      const double down = value_fn();
      vals[i] = saved;
      const double fd = (up - down) / (2.0 * step);
      worst = std::max(worst, rel_err(fd, p.grad_at(static_cast<int64_t>(i))));
    };
    for (size_t i = 0; i < n; i += stride) probe(i);
    if (stride > 1 && n > 0 && (n - 1) % stride != 0) probe(n - 1);
  }
  return worst;
}

inline std::vector<double> random_vec(size_t n, spg::Rng& rng, double lo = -1.0,
                                      double hi = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

}  // namespace spgtest
