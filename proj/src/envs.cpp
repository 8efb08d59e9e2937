#include "spg/envs.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "spg/errors.hpp"

namespace spg {

const char* task_name(Task t) {
  switch (t) {
    case Task::kSort: return "sort";
    case Task::kMwm: return "mwm";
    case Task::kTsp: return "tsp";
  }
  return "?";
}

Task task_from_name(const std::string& s) {
  if (s == "sort") return Task::kSort;
  if (s == "mwm") return Task::kMwm;
  if (s == "tsp") return Task::kTsp;
  throw ConfigError("unknown task: " + s + " (expected sort|mwm|tsp)");
}

int feature_dim(Task t) { return t == Task::kSort ? 1 : 2; }

int64_t record_size(Task t, int n) {
  switch (t) {
    case Task::kSort: return n;
    case Task::kMwm: return 4 * static_cast<int64_t>(n);
    case Task::kTsp: return 2 * static_cast<int64_t>(n);
  }
  return 0;
}

Instance gen_sorting(int n, Rng& rng) {
  if (n < 2) throw ConfigError("sorting instance needs n >= 2");
  Instance s;
  s.n = n;
  s.feat.resize(n);
  for (int i = 0; i < n; ++i)
    s.feat[i] = static_cast<double>(i + 1) / static_cast<double>(n);
  rng.shuffle(s.feat);
  return s;
}

Instance gen_mwm(int n, Rng& rng) {
  if (n < 1) throw ConfigError("matching instance needs n >= 1");
  Instance s;
  s.n = n;
  s.feat.resize(4 * static_cast<size_t>(n));
  for (auto& v : s.feat) v = rng.uniform();
  return s;
}

Instance gen_tsp(int n, Rng& rng) {
  if (n < 3) throw ConfigError("tsp instance needs n >= 3");
  Instance s;
  s.n = n;
  s.feat.resize(2 * static_cast<size_t>(n));
  for (auto& v : s.feat) v = rng.uniform();
  return s;
}

Instance gen_instance(Task t, int n, Rng& rng) {
  switch (t) {
    case Task::kSort: return gen_sorting(n, rng);
    case Task::kMwm: return gen_mwm(n, rng);
    case Task::kTsp: return gen_tsp(n, rng);
  }
  throw ConfigError("bad task");
}

namespace {

void check_sizes(const Instance& s, const PermutationMatrix& p,
                 const char* what) {
  if (p.n() != s.n)
    throw ShapeError(std::string(what) + ": permutation size " +
                     std::to_string(p.n()) + " vs instance n " +
                     std::to_string(s.n));
}

double dist2d(const double* a, const double* b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1];
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

double reward_sorting(const Instance& s, const PermutationMatrix& p) {
  check_sizes(s, p, "reward_sorting");
  const int n = s.n;
  // Permuted list y_i = values[perm[i]]; count concordant/discordant pairs
  // against ascending order. No ties: values are distinct by construction.
  int64_t concordant = 0, discordant = 0;
  for (int i = 0; i < n; ++i) {
    const double yi = s.feat[p.perm[i]];
    for (int j = i + 1; j < n; ++j) {
      if (s.feat[p.perm[j]] > yi)
        ++concordant;
      else
        ++discordant;
    }
  }
  const double pairs = 0.5 * n * (n - 1);
  return static_cast<double>(concordant - discordant) / pairs;
}

double reward_mwm(const Instance& s, const PermutationMatrix& p) {
  check_sizes(s, p, "reward_mwm");
  const int n = s.n;
  const double* v1 = s.feat.data();
  const double* v2 = s.feat.data() + 2 * static_cast<size_t>(n);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += dist2d(v1 + 2 * i, v2 + 2 * p.perm[i]);
  return sum;
}

double reward_tsp(const Instance& s, const PermutationMatrix& p) {
  check_sizes(s, p, "reward_tsp");
  const int n = s.n;
  const double* pts = s.feat.data();
  double len = 0.0;
  for (int i = 0; i < n; ++i) {
    const int a = p.perm[i];
    const int b = p.perm[(i + 1) % n];  // closed tour
    len += dist2d(pts + 2 * a, pts + 2 * b);
  }
  return -len;
}

double reward(Task t, const Instance& s, const PermutationMatrix& p) {
  switch (t) {
    case Task::kSort: return reward_sorting(s, p);
    case Task::kMwm: return reward_mwm(s, p);
    case Task::kTsp: return reward_tsp(s, p);
  }
  throw ConfigError("bad task");
}

std::pair<double, PermutationMatrix> mwm_optimal(const Instance& s) {
  const int n = s.n;
  const double* v1 = s.feat.data();
  const double* v2 = s.feat.data() + 2 * static_cast<size_t>(n);
  std::vector<double> d(static_cast<size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) d[i * n + j] = dist2d(v1 + 2 * i, v2 + 2 * j);
  PermutationMatrix p = hungarian_max(d.data(), n);
  return {trace_inner(p, d.data(), n), std::move(p)};
}

double optimality_ratio_given(const Instance& s, const PermutationMatrix& p,
                              double optimal_weight) {
  if (!(optimal_weight > 0.0))
    throw NumericError(
        "optimality_ratio: degenerate instance with optimal weight 0");
  return reward_mwm(s, p) / optimal_weight;
}

double optimality_ratio(const Instance& s, const PermutationMatrix& p) {
  return optimality_ratio_given(s, p, mwm_optimal(s).first);
}

double tsp_optimal_small(const Instance& s) {
  const int n = s.n;
  if (n > 10)
    throw ConfigError(
        "tsp_optimal_small: exact enumeration capped at n=10; use heuristic "
        "bounds for larger instances");
  const double* pts = s.feat.data();
  std::vector<double> d(static_cast<size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) d[i * n + j] = dist2d(pts + 2 * i, pts + 2 * j);
  std::vector<int> order(n - 1);
  std::iota(order.begin(), order.end(), 1);
  double best = std::numeric_limits<double>::infinity();
  do {
    double len = d[0 * n + order[0]];
    for (int i = 0; i + 1 < n - 1; ++i) len += d[order[i] * n + order[i + 1]];
    len += d[order[n - 2] * n + 0];
    best = std::min(best, len);
  } while (std::next_permutation(order.begin(), order.end()));
  return best;
}

}  // namespace spg
