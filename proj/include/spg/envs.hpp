#pragma once

// Benchmark environments: sorting (Kendall-Tau reward), maximum-weight
// bipartite matching on unit-square points, and closed-tour Euclidean TSP.
// Instances are flat f64 records; generators take explicit RNGs so callers
// own determinism and parallelism.
//
// Feature layouts: sort = N values; mwm = v1 rows then v2 rows (N×2 each);
// tsp = N×2 points.

#include <cstdint>
#include <utility>
#include <vector>

#include "spg/hungarian.hpp"
#include "spg/rng.hpp"

namespace spg {

enum class Task : uint8_t { kSort = 0, kMwm = 1, kTsp = 2 };

const char* task_name(Task t);
Task task_from_name(const std::string& s);  // ConfigError on unknown
int feature_dim(Task t);                    // K of the N×K state matrix
int64_t record_size(Task t, int n);         // doubles per instance

struct Instance {
  int n = 0;
  std::vector<double> feat;
};

// Uniformly shuffled {1/n, …, 1}, n >= 2.
Instance gen_sorting(int n, Rng& rng);
// Two independent point sets of n uniform points in [0,1]², n >= 1.
Instance gen_mwm(int n, Rng& rng);
// n uniform points in [0,1]², n >= 3.
Instance gen_tsp(int n, Rng& rng);
Instance gen_instance(Task t, int n, Rng& rng);

// Kendall-Tau (tau-a) of the permuted list against ascending order, in
// [-1, 1]; values are distinct by construction.
double reward_sorting(const Instance& s, const PermutationMatrix& p);
// Σ_i ‖v1[i] − v2[perm[i]]‖₂, maximization objective.
double reward_mwm(const Instance& s, const PermutationMatrix& p);
// Negated closed-tour length over points ordered by p.
double reward_tsp(const Instance& s, const PermutationMatrix& p);
double reward(Task t, const Instance& s, const PermutationMatrix& p);

// Exact maximum matching via the assignment solver on pairwise distances.
std::pair<double, PermutationMatrix> mwm_optimal(const Instance& s);
// reward_mwm / optimal weight; NumericError when the optimal weight is 0.
double optimality_ratio(const Instance& s, const PermutationMatrix& p);
double optimality_ratio_given(const Instance& s, const PermutationMatrix& p,
                              double optimal_weight);

// Exact minimum closed-tour length by fixed-first-city enumeration, n <= 10.
double tsp_optimal_small(const Instance& s);

}  // namespace spg
