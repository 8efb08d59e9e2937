#include "spg/sinkhorn.hpp"

namespace spg::ad {

Tensor sinkhorn(Tape& t, const Tensor& logits, double tau, int iters,
                double eps_offset) {
  const Shape& s = logits.shape();
  const bool batched = s.rank == 3;
  if (!(s.rank == 2 || batched))
    throw ShapeError("sinkhorn: need N×N or B×N×N, got " + s.str());
  const int64_t n = batched ? s[1] : s[0];
  const int64_t n2 = batched ? s[2] : s[1];
  if (n != n2)
    throw ShapeError("sinkhorn: matrix not square: " + s.str());
  if (!(tau > 0.0)) throw ConfigError("sinkhorn: tau must be positive");
  if (iters < 0) throw ConfigError("sinkhorn: iteration count must be >= 0");

  const int row_dim = batched ? 2 : 1;
  const int col_dim = batched ? 1 : 0;
  Tensor x = scale(t, logits, 1.0 / tau);
  for (int i = 0; i < iters; ++i) {
    x = sub_bcast(t, x, logsumexp(t, x, row_dim, /*keepdims=*/true));
    x = sub_bcast(t, x, logsumexp(t, x, col_dim, /*keepdims=*/true));
  }
  return add_const(t, exp(t, x), eps_offset);
}

}  // namespace spg::ad
