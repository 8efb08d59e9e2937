#pragma once

// Linear assignment on square score matrices plus the permutation type used
// across the project. hungarian_max returns the permutation maximizing
// Σ_i m[i, perm[i]] via a shortest-augmenting-path solver on the negated
// matrix (O(N³)). Rows are processed in ascending order and column scans run
// ascending, so ties resolve toward low row/column indices deterministically.

#include <cstdint>
#include <utility>
#include <vector>

#include "spg/rng.hpp"

namespace spg {

struct PermutationMatrix {
  // Row i of the materialized matrix has its one at column perm[i].
  std::vector<int32_t> perm;

  PermutationMatrix() = default;
  explicit PermutationMatrix(std::vector<int32_t> p) : perm(std::move(p)) {}
  static PermutationMatrix identity(int n);

  int n() const { return static_cast<int>(perm.size()); }
  bool is_valid() const;
  // Dense N×N row-major 0/1 matrix.
  std::vector<double> materialize() const;
  bool operator==(const PermutationMatrix& o) const { return perm == o.perm; }
};

// m is n×n row-major, finite entries required.
PermutationMatrix hungarian_max(const double* m, int n);

// Σ_i m[i, perm[i]] == Tr(PᵀM).
double trace_inner(const PermutationMatrix& p, const double* m, int n);

bool is_doubly_stochastic(const double* m, int n, double tol);

// Swaps k=2 uniformly chosen distinct rows in copies of both the permutation
// and the soft matrix (row-major n×n). Only k=2 is supported.
std::pair<PermutationMatrix, std::vector<double>> k_exchange(
    const PermutationMatrix& p, const std::vector<double>& soft, int k,
    Rng& rng);

}  // namespace spg
