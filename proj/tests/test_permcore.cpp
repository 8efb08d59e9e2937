// Permutation machinery: Sinkhorn against a higher-precision linear-space
// reference, assignment solver against factorial brute force, k-exchange
// distribution, doubly-stochastic checks.

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "spg/hungarian.hpp"
#include "spg/sinkhorn.hpp"
#include "testutil.hpp"

using namespace spg;
using namespace spg::ad;

namespace {

// Straightforward linear-space reference: exponentiate, then alternate
// explicit row/column divisions in long double, then add the offset.
std::vector<double> sinkhorn_reference(const std::vector<double>& logits,
                                       int n, double tau, int iters,
                                       double eps, bool row_first = true) {
  std::vector<long double> y(n * n);
  for (int i = 0; i < n * n; ++i)
    y[i] = expl(static_cast<long double>(logits[i]) / tau);
  for (int it = 0; it < iters; ++it) {
    for (int phase = 0; phase < 2; ++phase) {
      const bool rows = row_first ? phase == 0 : phase == 1;
      if (rows) {
        for (int i = 0; i < n; ++i) {
          long double s = 0;
          for (int j = 0; j < n; ++j) s += y[i * n + j];
          for (int j = 0; j < n; ++j) y[i * n + j] /= s;
        }
      } else {
        for (int j = 0; j < n; ++j) {
          long double s = 0;
          for (int i = 0; i < n; ++i) s += y[i * n + j];
          for (int i = 0; i < n; ++i) y[i * n + j] /= s;
        }
      }
    }
  }
  std::vector<double> out(n * n);
  for (int i = 0; i < n * n; ++i)
    out[i] = static_cast<double>(y[i]) + eps;
  return out;
}

std::vector<double> run_sinkhorn(const std::vector<double>& logits, int n,
                                 double tau, int iters) {
  Tape t(false);
  Tensor x = Tensor::from(Shape::mat(n, n), logits);
  return ad::sinkhorn(t, x, tau, iters).value();
}

PermutationMatrix brute_force_max(const double* m, int n, double* best_out) {
  std::vector<int32_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  double best = -1e300;
  std::vector<int32_t> best_perm;
  do {
    double s = 0;
    for (int i = 0; i < n; ++i) s += m[i * n + idx[i]];
    if (s > best) {
      best = s;
      best_perm = idx;
    }
  } while (std::next_permutation(idx.begin(), idx.end()));
  *best_out = best;
  return PermutationMatrix(best_perm);
}

}  // namespace

TEST_CASE("sinkhorn: zero logits give the uniform matrix plus offset") {
  for (double tau : {1.0, 0.05}) {
    auto out = run_sinkhorn(std::vector<double>(25, 0.0), 5, tau, 10);
    for (double v : out)
      CHECK(v == doctest::Approx(0.2 + 1e-6).epsilon(1e-12));
  }
}

TEST_CASE("sinkhorn: L=0 with tau=1 is exp(x) plus offset") {
  Rng rng = derive_rng(41, Stream::kTest, 0);
  auto logits = spgtest::random_vec(9, rng, -2.0, 2.0);
  auto out = run_sinkhorn(logits, 3, 1.0, 0);
  for (int i = 0; i < 9; ++i)
    CHECK(out[i] == doctest::Approx(std::exp(logits[i]) + 1e-6).epsilon(1e-14));
}

TEST_CASE("sinkhorn matches the linear-space reference to 1e-8") {
  Rng rng = derive_rng(42, Stream::kTest, 0);
  for (int trial = 0; trial < 20; ++trial) {
    auto logits = spgtest::random_vec(25, rng, -5.0, 5.0);
    auto got = run_sinkhorn(logits, 5, 0.05, 10);
    auto want = sinkhorn_reference(logits, 5, 0.05, 10, 1e-6);
    for (int i = 0; i < 25; ++i)
      CHECK(std::fabs(got[i] - want[i]) < 1e-8);
  }
}

TEST_CASE("sinkhorn iterates rows first, then columns") {
  // After a single iteration the two orders differ transiently; the
  // implementation must match the row-first reference and not the
  // column-first one.
  Rng rng = derive_rng(43, Stream::kTest, 0);
  auto logits = spgtest::random_vec(16, rng, -2.0, 2.0);
  auto got = run_sinkhorn(logits, 4, 0.5, 1);
  auto row_first = sinkhorn_reference(logits, 4, 0.5, 1, 1e-6, true);
  auto col_first = sinkhorn_reference(logits, 4, 0.5, 1, 1e-6, false);
  double d_row = 0, d_col = 0;
  for (int i = 0; i < 16; ++i) {
    d_row = std::max(d_row, std::fabs(got[i] - row_first[i]));
    d_col = std::max(d_col, std::fabs(got[i] - col_first[i]));
  }
  CHECK(d_row < 1e-12);
  CHECK(d_col > 1e-6);
}

TEST_CASE("sinkhorn outputs are doubly stochastic across sizes and taus") {
  // Ten iterations converge below 1e-4 when the temperature-scaled logits
  // x/tau stay mild (the residual floor is the N·1e-6 offset, which is
  // exactly the documented tolerance shape). Sharper inputs leave a larger
  // transient row residual; that regime is covered by the exact-reference
  // comparison above, not by this tolerance.
  Rng rng = derive_rng(44, Stream::kTest, 0);
  for (int n : {5, 10, 20, 50}) {
    for (double tau : {1.0, 0.5, 0.1, 0.05}) {
      auto logits = spgtest::random_vec(n * n, rng, -tau, tau);
      auto out = run_sinkhorn(logits, n, tau, 10);
      CHECK(is_doubly_stochastic(out.data(), n, 1e-4));
      for (double v : out) CHECK(v >= 1e-6);
    }
  }
}

TEST_CASE("sinkhorn errors: non-square, bad tau") {
  Tape t;
  Tensor bad = Tensor::zeros(Shape::mat(3, 4));
  CHECK_THROWS_AS(ad::sinkhorn(t, bad, 0.5, 5), ShapeError);
  Tensor ok = Tensor::zeros(Shape::mat(3, 3));
  CHECK_THROWS_AS(ad::sinkhorn(t, ok, 0.0, 5), ConfigError);
  CHECK_THROWS_AS(ad::sinkhorn(t, ok, -1.0, 5), ConfigError);
}

TEST_CASE("temperature sharpening: max row entry grows as tau shrinks") {
  Rng rng = derive_rng(45, Stream::kTest, 0);
  auto logits = spgtest::random_vec(64, rng, -3.0, 3.0);
  double prev = 0.0;
  for (double tau : {1.0, 0.5, 0.1, 0.05}) {
    auto out = run_sinkhorn(logits, 8, tau, 10);
    double mean_max = 0;
    for (int i = 0; i < 8; ++i)
      mean_max += *std::max_element(out.begin() + i * 8,
                                    out.begin() + (i + 1) * 8);
    mean_max /= 8;
    CHECK(mean_max >= prev - 1e-12);
    prev = mean_max;
  }
}

TEST_CASE("rounding stabilizes for small temperatures") {
  // Once the balancing has converged (a truncated L=10 run still carries a
  // transient at sharp temperatures), the rounded permutation is the same
  // for every small tau and equals the assignment maximizer on the raw
  // logits — the analytic tau -> 0 limit.
  Rng rng = derive_rng(46, Stream::kTest, 0);
  for (int trial = 0; trial < 10; ++trial) {
    auto logits = spgtest::random_vec(36, rng, -3.0, 3.0);
    PermutationMatrix want = hungarian_max(logits.data(), 6);
    for (double tau : {0.1, 0.05, 0.01}) {
      auto out = run_sinkhorn(logits, 6, tau, 300);
      CHECK(hungarian_max(out.data(), 6) == want);
    }
  }
}

TEST_CASE("hungarian: identity and vertex fixed points") {
  std::vector<double> eye = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  CHECK(hungarian_max(eye.data(), 3) == PermutationMatrix::identity(3));
  // An arbitrary permutation matrix maps to itself.
  PermutationMatrix p({2, 0, 3, 1});
  auto dense = p.materialize();
  CHECK(hungarian_max(dense.data(), 4) == p);
}

TEST_CASE("hungarian is exactly optimal against brute force") {
  Rng rng = derive_rng(47, Stream::kTest, 0);
  for (int n = 2; n <= 7; ++n) {
    for (int trial = 0; trial < 60; ++trial) {
      auto m = spgtest::random_vec(n * n, rng, 0.0, 1.0);
      double best;
      brute_force_max(m.data(), n, &best);
      PermutationMatrix p = hungarian_max(m.data(), n);
      CHECK(p.is_valid());
      CHECK(trace_inner(p, m.data(), n) == best);
    }
  }
}

TEST_CASE("hungarian rejects non-finite scores") {
  std::vector<double> m = {1.0, 2.0, std::nan(""), 4.0};
  CHECK_THROWS_AS(hungarian_max(m.data(), 2), NumericError);
}

TEST_CASE("trace_inner examples and dense oracle") {
  {
    std::vector<double> eye = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    CHECK(trace_inner(PermutationMatrix::identity(3), eye.data(), 3) == 3.0);
  }
  {
    std::vector<double> m = {1, 2, 3, 4, 5, 6, 7, 8, 9};
    PermutationMatrix rev({2, 1, 0});
    CHECK(trace_inner(rev, m.data(), 3) == 15.0);  // 3 + 5 + 7
  }
  Rng rng = derive_rng(48, Stream::kTest, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(6));
    auto m = spgtest::random_vec(n * n, rng);
    std::vector<int32_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng shuf = derive_rng(48, Stream::kTest, trial + 1);
    shuf.shuffle(idx);
    PermutationMatrix p(idx);
    // Dense oracle: Tr(PᵀM) over materialized matrices.
    auto dense = p.materialize();
    double want = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) want += dense[i * n + j] * m[i * n + j];
    CHECK(trace_inner(p, m.data(), n) == doctest::Approx(want).epsilon(1e-15));
  }
  // Size mismatch errors.
  std::vector<double> m4(16, 0.0);
  CHECK_THROWS_AS(trace_inner(PermutationMatrix::identity(3), m4.data(), 4),
                  ShapeError);
}

TEST_CASE("is_doubly_stochastic basics") {
  std::vector<double> uni(16, 0.25);
  CHECK(is_doubly_stochastic(uni.data(), 4, 1e-9));
  auto perm = PermutationMatrix({1, 3, 0, 2}).materialize();
  CHECK(is_doubly_stochastic(perm.data(), 4, 0.0));
  std::vector<double> ones(9, 1.0);
  CHECK_FALSE(is_doubly_stochastic(ones.data(), 3, 1e-6));
  std::vector<double> neg = {0.5, 0.5, 1.5, -0.5};
  CHECK_FALSE(is_doubly_stochastic(neg.data(), 2, 1e-6));
}

TEST_CASE("k_exchange: forced swap at N=2, validity, uniform pair choice") {
  {
    Rng rng = derive_rng(49, Stream::kTest, 0);
    PermutationMatrix p = PermutationMatrix::identity(2);
    std::vector<double> soft = {0.9, 0.1, 0.1, 0.9};
    auto [q, s] = k_exchange(p, soft, 2, rng);
    CHECK(q.perm == std::vector<int32_t>{1, 0});
    CHECK(s == std::vector<double>{0.1, 0.9, 0.9, 0.1});
  }
  {
    Rng rng = derive_rng(49, Stream::kTest, 1);
    PermutationMatrix p = PermutationMatrix::identity(5);
    Tape t(false);
    Rng lrng = derive_rng(49, Stream::kTest, 2);
    auto logits = spgtest::random_vec(25, lrng, -2.0, 2.0);
    auto soft = run_sinkhorn(logits, 5, 0.5, 10);
    std::vector<double> row_sums(5, 0.0), col_sums(5, 0.0);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) {
        row_sums[i] += soft[i * 5 + j];
        col_sums[j] += soft[i * 5 + j];
      }
    auto [q, s] = k_exchange(p, soft, 2, rng);
    CHECK(q.is_valid());
    // Row swaps preserve the multiset of row sums and all column sums.
    std::vector<double> rs(5, 0.0), cs(5, 0.0);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) {
        rs[i] += s[i * 5 + j];
        cs[j] += s[i * 5 + j];
      }
    std::sort(rs.begin(), rs.end());
    std::sort(row_sums.begin(), row_sums.end());
    for (int i = 0; i < 5; ++i) {
      CHECK(rs[i] == doctest::Approx(row_sums[i]).epsilon(1e-15));
      CHECK(cs[i] == doctest::Approx(col_sums[i]).epsilon(1e-15));
    }
  }
  {
    // Each unordered row pair drawn with frequency 0.1 ± 0.02 on N=5.
    Rng rng = derive_rng(50, Stream::kTest, 0);
    PermutationMatrix p = PermutationMatrix::identity(5);
    std::vector<double> soft(25, 0.2);
    std::map<std::pair<int, int>, int> counts;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
      auto [q, s] = k_exchange(p, soft, 2, rng);
      int a = -1, b = -1;
      for (int r = 0; r < 5; ++r)
        if (q.perm[r] != r) (a < 0 ? a : b) = r;
      REQUIRE(a >= 0);
      REQUIRE(b >= 0);
      counts[{a, b}] += 1;
    }
    CHECK(counts.size() == 10);
    for (const auto& [pair, c] : counts) {
      const double freq = static_cast<double>(c) / draws;
      CHECK(freq == doctest::Approx(0.1).epsilon(0.2));
    }
  }
  // Errors: unsupported k, undersized N.
  Rng rng = derive_rng(51, Stream::kTest, 0);
  PermutationMatrix p1 = PermutationMatrix::identity(1);
  std::vector<double> s1 = {1.0};
  CHECK_THROWS_AS(k_exchange(p1, s1, 2, rng), ShapeError);
  PermutationMatrix p3 = PermutationMatrix::identity(3);
  std::vector<double> s3(9, 1.0 / 3);
  CHECK_THROWS_AS(k_exchange(p3, s3, 3, rng), ConfigError);
}
