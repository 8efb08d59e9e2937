// Kernel-layer checks: SIMD variants against the scalar reference, plus
// accuracy of the transcendental kernels against libm.

#include <doctest.h>

#include <cmath>
#include <vector>

#include "spg/kernels.hpp"
#include "spg/rng.hpp"
#include "testutil.hpp"

using namespace spg;
namespace ker = spg::kernels;

namespace {

std::vector<ker::Isa> simd_variants() {
  std::vector<ker::Isa> v;
  if (ker::isa_supported(ker::Isa::kAvx2)) v.push_back(ker::Isa::kAvx2);
  if (ker::isa_supported(ker::Isa::kAvx512)) v.push_back(ker::Isa::kAvx512);
  return v;
}

struct IsaRestore {
  ker::Isa saved = ker::active_isa();
  ~IsaRestore() { ker::set_isa(saved); }
};

}  // namespace

TEST_CASE("gemm variants agree with the scalar reference") {
  IsaRestore restore;
  Rng rng = derive_rng(7, Stream::kTest, 0);
  const int64_t sizes[] = {1, 2, 3, 5, 8, 13, 16, 17, 33, 64, 128, 131};
  for (auto mode :
       {ker::MatMode::kNN, ker::MatMode::kNT, ker::MatMode::kTN}) {
    for (int trial = 0; trial < 24; ++trial) {
      const int64_t m = sizes[rng.below(12)];
      const int64_t n = sizes[rng.below(12)];
      const int64_t k = sizes[rng.below(12)];
      const bool acc = trial % 2 == 0;
      const int64_t a_rows = mode == ker::MatMode::kTN ? k : m;
      const int64_t a_cols = mode == ker::MatMode::kTN ? m : k;
      const int64_t b_rows = mode == ker::MatMode::kNT ? n : k;
      const int64_t b_cols = mode == ker::MatMode::kNT ? k : n;
      auto a = spgtest::random_vec(a_rows * a_cols, rng);
      auto b = spgtest::random_vec(b_rows * b_cols, rng);
      auto c0 = spgtest::random_vec(m * n, rng);

      ker::set_isa(ker::Isa::kScalar);
      auto ref = c0;
      ker::gemm(mode, m, n, k, a.data(), a_cols, b.data(), b_cols, ref.data(),
                n, acc);
      double scale = 1.0;
      for (double v : ref) scale = std::max(scale, std::fabs(v));
      for (ker::Isa isa : simd_variants()) {
        ker::set_isa(isa);
        auto out = c0;
        ker::gemm(mode, m, n, k, a.data(), a_cols, b.data(), b_cols,
                  out.data(), n, acc);
        double worst = 0.0;
        for (size_t i = 0; i < out.size(); ++i)
          worst = std::max(worst, std::fabs(out[i] - ref[i]));
        CAPTURE(ker::isa_name(isa));
        CAPTURE(m);
        CAPTURE(n);
        CAPTURE(k);
        CHECK(worst / scale < 1e-13);  // summation-order rounding only
      }
    }
  }
}

TEST_CASE("elementwise and reduction kernels are bit-identical across variants") {
  IsaRestore restore;
  Rng rng = derive_rng(11, Stream::kTest, 0);
  const int64_t n = 1003;  // odd length exercises the vector tails
  auto x = spgtest::random_vec(n, rng, -30.0, 30.0);
  auto y = spgtest::random_vec(n, rng, -2.0, 2.0);

  struct Result {
    std::vector<double> exp_v, tanh_v, sig_v, leaky_v, add_v, fma_v;
    double sum, dot, mx, ssq;
  };
  auto run = [&](ker::Isa isa) {
    ker::set_isa(isa);
    Result r;
    r.exp_v.resize(n);
    r.tanh_v.resize(n);
    r.sig_v.resize(n);
    r.leaky_v.resize(n);
    r.add_v.resize(n);
    r.fma_v.assign(n, 0.5);
    ker::vexp(x.data(), r.exp_v.data(), n);
    ker::vtanh(x.data(), r.tanh_v.data(), n);
    ker::vsigmoid(x.data(), r.sig_v.data(), n);
    ker::leaky_relu(x.data(), r.leaky_v.data(), n, 0.01);
    ker::vadd(x.data(), y.data(), r.add_v.data(), n);
    ker::vfma(x.data(), y.data(), r.fma_v.data(), n, true);
    r.sum = ker::vsum(x.data(), n);
    r.dot = ker::vdot(x.data(), y.data(), n);
    r.mx = ker::vmax(x.data(), n);
    r.ssq = ker::vsumsq(x.data(), n);
    return r;
  };

  const Result ref = run(ker::Isa::kScalar);
  for (ker::Isa isa : simd_variants()) {
    CAPTURE(ker::isa_name(isa));
    const Result out = run(isa);
    CHECK(out.exp_v == ref.exp_v);
    CHECK(out.tanh_v == ref.tanh_v);
    CHECK(out.sig_v == ref.sig_v);
    CHECK(out.leaky_v == ref.leaky_v);
    CHECK(out.add_v == ref.add_v);
    CHECK(out.fma_v == ref.fma_v);
    CHECK(out.sum == ref.sum);
    CHECK(out.dot == ref.dot);
    CHECK(out.mx == ref.mx);
    CHECK(out.ssq == ref.ssq);
  }
}

TEST_CASE("vexp matches libm over the finite range") {
  IsaRestore restore;
  Rng rng = derive_rng(13, Stream::kTest, 0);
  for (ker::Isa isa : simd_variants()) {
    ker::set_isa(isa);
    for (int i = 0; i < 20000; ++i) {
      const double mag = std::pow(10.0, rng.uniform(-3.0, 2.85));
      const double v = rng.uniform() < 0.5 ? mag : -mag;
      double out;
      ker::vexp(&v, &out, 1);
      const double want = std::exp(v);
      CAPTURE(v);
      if (want == 0.0 || std::isinf(want)) {
        CHECK(out == want);
      } else {
        CHECK(spgtest::rel_err(out, want, 0.0) < 5e-15);
      }
    }
    double edge[] = {0.0, -0.0, 1.0, -1.0, 709.0, -745.0, 1000.0, -1000.0};
    double got[8];
    ker::vexp(edge, got, 8);
    CHECK(got[0] == 1.0);
    CHECK(got[1] == 1.0);
    CHECK(spgtest::rel_err(got[2], std::exp(1.0), 0.0) < 5e-15);
    CHECK(std::isinf(got[6]));
    CHECK(got[7] == 0.0);
  }
}

TEST_CASE("vtanh and vsigmoid match libm") {
  IsaRestore restore;
  Rng rng = derive_rng(17, Stream::kTest, 0);
  for (ker::Isa isa : simd_variants()) {
    ker::set_isa(isa);
    for (int i = 0; i < 20000; ++i) {
      const double v = rng.uniform(-25.0, 25.0);
      double t, s;
      ker::vtanh(&v, &t, 1);
      ker::vsigmoid(&v, &s, 1);
      CHECK(std::fabs(t - std::tanh(v)) < 1e-14);
      CHECK(std::fabs(s - 1.0 / (1.0 + std::exp(-v))) < 1e-14);
    }
    double big = 40.0, neg = -40.0, zero = 0.0, out;
    ker::vtanh(&big, &out, 1);
    CHECK(out == 1.0);
    ker::vtanh(&neg, &out, 1);
    CHECK(out == -1.0);
    ker::vtanh(&zero, &out, 1);
    CHECK(out == 0.0);
  }
}

TEST_CASE("column helpers match naive loops") {
  IsaRestore restore;
  Rng rng = derive_rng(19, Stream::kTest, 0);
  const int64_t rows = 37, cols = 21;
  auto x = spgtest::random_vec(rows * cols, rng, -3.0, 3.0);
  std::vector<double> naive_sum(cols, 0.0), naive_max(cols,
                                                      -1e300);
  for (int64_t i = 0; i < rows; ++i)
    for (int64_t j = 0; j < cols; ++j) {
      naive_sum[j] += x[i * cols + j];
      naive_max[j] = std::max(naive_max[j], x[i * cols + j]);
    }
  for (ker::Isa isa : simd_variants()) {
    ker::set_isa(isa);
    std::vector<double> cs(cols), cm(cols);
    ker::col_sum(x.data(), rows, cols, cs.data());
    ker::col_max(x.data(), rows, cols, cm.data());
    for (int64_t j = 0; j < cols; ++j) {
      CHECK(spgtest::rel_err(cs[j], naive_sum[j], 1e-12) < 1e-12);
      CHECK(cm[j] == naive_max[j]);
    }
  }
}
