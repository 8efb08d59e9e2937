#include "spg/hungarian.hpp"

#include <cmath>
#include <limits>

#include "spg/errors.hpp"

namespace spg {

PermutationMatrix PermutationMatrix::identity(int n) {
  std::vector<int32_t> p(n);
  for (int i = 0; i < n; ++i) p[i] = i;
  return PermutationMatrix(std::move(p));
}

bool PermutationMatrix::is_valid() const {
  std::vector<bool> seen(perm.size(), false);
  for (int32_t v : perm) {
    if (v < 0 || v >= static_cast<int32_t>(perm.size()) || seen[v])
      return false;
    seen[v] = true;
  }
  return true;
}

std::vector<double> PermutationMatrix::materialize() const {
  const int m = n();
  std::vector<double> out(static_cast<size_t>(m) * m, 0.0);
  for (int i = 0; i < m; ++i) out[i * m + perm[i]] = 1.0;
  return out;
}

PermutationMatrix hungarian_max(const double* m, int n) {
  if (n <= 0) throw ShapeError("hungarian: empty matrix");
  for (int i = 0; i < n * n; ++i)
    if (!std::isfinite(m[i]))
      throw NumericError("hungarian: non-finite score at index " +
                         std::to_string(i));

  // Shortest augmenting path on cost = -score, 1-based with column 0 as the
  // virtual root (classic JV formulation).
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> way(n + 1, 0), match(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const int i0 = match[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = -m[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0);
  }

  std::vector<int32_t> perm(n, -1);
  for (int j = 1; j <= n; ++j)
    if (match[j] > 0) perm[match[j] - 1] = static_cast<int32_t>(j - 1);
  return PermutationMatrix(std::move(perm));
}

double trace_inner(const PermutationMatrix& p, const double* m, int n) {
  if (p.n() != n)
    throw ShapeError("trace_inner: permutation size " +
                     std::to_string(p.n()) + " vs matrix " +
                     std::to_string(n));
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += m[i * n + p.perm[i]];
  return s;
}

bool is_doubly_stochastic(const double* m, int n, double tol) {
  for (int i = 0; i < n * n; ++i)
    if (!(m[i] >= 0.0)) return false;
  for (int i = 0; i < n; ++i) {
    double rs = 0.0;
    for (int j = 0; j < n; ++j) rs += m[i * n + j];
    if (std::fabs(rs - 1.0) > tol) return false;
  }
  for (int j = 0; j < n; ++j) {
    double cs = 0.0;
    for (int i = 0; i < n; ++i) cs += m[i * n + j];
    if (std::fabs(cs - 1.0) > tol) return false;
  }
  return true;
}

std::pair<PermutationMatrix, std::vector<double>> k_exchange(
    const PermutationMatrix& p, const std::vector<double>& soft, int k,
    Rng& rng) {
  const int n = p.n();
  if (k != 2) throw ConfigError("k_exchange: only k=2 is supported");
  if (n < 2) throw ShapeError("k_exchange: need at least 2 rows");
  if (soft.size() != static_cast<size_t>(n) * n)
    throw ShapeError("k_exchange: soft matrix size mismatch");
  // Uniform unordered pair {a, b}.
  const int a = static_cast<int>(rng.below(n));
  int b = static_cast<int>(rng.below(n - 1));
  if (b >= a) ++b;
  PermutationMatrix q = p;
  std::swap(q.perm[a], q.perm[b]);
  std::vector<double> soft_out = soft;
  for (int j = 0; j < n; ++j)
    std::swap(soft_out[a * n + j], soft_out[b * n + j]);
  return {std::move(q), std::move(soft_out)};
}

}  // namespace spg
