#include "spg/adam.hpp"

#include <cmath>

#include "spg/errors.hpp"
#include "spg/kernels.hpp"

namespace spg::ad {

namespace ker = spg::kernels;

void AdamState::init_like(const std::vector<Tensor>& params) {
  m.clear();
  v.clear();
  for (const auto& p : params) {
    m.emplace_back(p.value().size(), 0.0);
    v.emplace_back(p.value().size(), 0.0);
  }
  t = 0;
}

void adam_step(std::vector<Tensor>& params, AdamState& state, double lr) {
  if (!state.initialized()) state.init_like(params);
  if (state.m.size() != params.size())
    throw ShapeError("adam_step: state tracks " +
                     std::to_string(state.m.size()) + " params, got " +
                     std::to_string(params.size()));
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& g = params[i].grad();
    for (double gv : g)
      if (!std::isfinite(gv))
        throw NumericError("adam_step: non-finite gradient in parameter " +
                           std::to_string(i));
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    const int64_t n = static_cast<int64_t>(p.value().size());
    if (static_cast<int64_t>(state.m[i].size()) != n)
      throw ShapeError("adam_step: state size mismatch at parameter " +
                       std::to_string(i));
    // Empty grad == zeros; moments still decay so the update stays standard.
    static thread_local std::vector<double> zero;
    const double* g;
    if (p.grad().empty()) {
      if (static_cast<int64_t>(zero.size()) < n) zero.assign(n, 0.0);
      g = zero.data();
    } else {
      g = p.grad().data();
    }
    ker::adam_update(p.value().data(), g, state.m[i].data(),
                     state.v[i].data(), n, lr, state.beta1, state.beta2,
                     state.eps, bc1, bc2);
  }
}

double grad_norm(const std::vector<Tensor>& params) {
  double ss = 0.0;
  for (const auto& p : params)
    if (!p.grad().empty())
      ss += ker::vsumsq(p.grad().data(),
                        static_cast<int64_t>(p.grad().size()));
  return std::sqrt(ss);
}

double clip_grad_norm(std::vector<Tensor>& params, double max_norm) {
  const double norm = grad_norm(params);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (auto& p : params) {
      if (p.grad().empty()) continue;
      auto& g = p.data()->grad;
      ker::vscale(g.data(), s, g.data(), static_cast<int64_t>(g.size()));
    }
  }
  return norm;
}

void zero_grads(std::vector<Tensor>& params) {
  for (auto& p : params) p.zero_grad();
}

}  // namespace spg::ad
