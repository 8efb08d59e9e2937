// Tape/op semantics and gradient checks. Every primitive gets a central
// finite-difference check: < 1e-6 relative error for linear ops, < 1e-3 for
// the rest (the observed errors are far smaller; these are the contract
// bounds).

#include <doctest.h>

#include <cmath>
#include <cstring>

#include "spg/batchnorm.hpp"
#include "spg/ops.hpp"
#include "spg/sinkhorn.hpp"
#include "testutil.hpp"

using namespace spg;
using namespace spg::ad;

namespace {

Tensor rand_tensor(Shape s, Rng& rng, bool rg = true, double lo = -1.0,
                   double hi = 1.0) {
  return Tensor::uniform(s, lo, hi, rng, rg);
}

}  // namespace

TEST_CASE("backward: sum and quadratic leaf gradients") {
  Rng rng = derive_rng(1, Stream::kTest, 0);
  Tensor x = rand_tensor(Shape::mat(3, 4), rng);
  {
    Tape t;
    Tensor loss = sum_all(t, x);
    t.backward(loss);
    for (size_t i = 0; i < x.value().size(); ++i)
      CHECK(x.grad_at(i) == doctest::Approx(1.0));
  }
  x.zero_grad();
  {
    Tape t;
    Tensor loss = sum_all(t, mul(t, x, x));
    t.backward(loss);
    for (size_t i = 0; i < x.value().size(); ++i)
      CHECK(x.grad_at(i) == doctest::Approx(2.0 * x.value()[i]));
  }
}

TEST_CASE("backward rejects non-scalar loss; unreachable leaves keep empty grad") {
  Rng rng = derive_rng(2, Stream::kTest, 0);
  Tensor x = rand_tensor(Shape::mat(2, 2), rng);
  Tensor unused = rand_tensor(Shape::mat(2, 2), rng);
  Tape t;
  Tensor y = add(t, x, x);
  CHECK_THROWS_AS(t.backward(y), ShapeError);
  Tensor loss = sum_all(t, y);
  t.backward(loss);
  CHECK(unused.grad().empty());  // documented convention: empty == zero
}

TEST_CASE("matmul values and gradients") {
  Rng rng = derive_rng(3, Stream::kTest, 0);
  // Identity cases.
  Tensor i3 = Tensor::from(Shape::mat(3, 3),
                           {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Tensor b = rand_tensor(Shape::mat(3, 3), rng, false);
  {
    Tape t;
    Tensor out = matmul(t, i3, b);
    for (size_t i = 0; i < 9; ++i)
      CHECK(out.value()[i] == doctest::Approx(b.value()[i]));
  }
  {
    Tape t;
    Tensor a = Tensor::from(Shape::mat(2, 2), {1, 2, 3, 4});
    Tensor e = Tensor::from(Shape::mat(2, 2), {1, 0, 0, 1});
    Tensor out = matmul(t, a, e);
    CHECK(out.value() == std::vector<double>{1, 2, 3, 4});
  }
  // Shape error names both operands.
  {
    Tape t;
    Tensor a = Tensor::zeros(Shape::mat(2, 3));
    Tensor c = Tensor::zeros(Shape::mat(2, 3));
    CHECK_THROWS_WITH_AS(matmul(t, a, c),
                         doctest::Contains("(2x3)"), ShapeError);
  }
  // grad of sum(a·b) wrt a equals ones·bᵀ, checked against the closed form
  // and against finite differences.
  Tensor a = rand_tensor(Shape::mat(3, 5), rng);
  Tensor bb = rand_tensor(Shape::mat(5, 4), rng);
  auto value = [&]() {
    Tape t(false);
    return sum_all(t, matmul(t, a, bb)).item();
  };
  Tape t;
  Tensor loss = sum_all(t, matmul(t, a, bb));
  t.backward(loss);
  for (int64_t i = 0; i < 3; ++i)
    for (int64_t k = 0; k < 5; ++k) {
      double rowsum = 0;
      for (int64_t j = 0; j < 4; ++j) rowsum += bb.value()[k * 4 + j];
      CHECK(a.grad_at(i * 5 + k) == doctest::Approx(rowsum).epsilon(1e-12));
    }
  CHECK(spgtest::fd_check(value, {a, bb}) < 1e-6);
}

TEST_CASE("leaky_relu examples and subgradient at zero") {
  Tape t;
  Tensor x = Tensor::from(Shape::vec(3), {2.0, -1.0, 0.0}, true);
  Tensor y = leaky_relu(t, x, 0.01);
  CHECK(y.value()[0] == 2.0);
  CHECK(y.value()[1] == doctest::Approx(-0.01));
  CHECK(y.value()[2] == 0.0);
  t.backward(sum_all(t, y));
  CHECK(x.grad_at(0) == 1.0);
  CHECK(x.grad_at(1) == doctest::Approx(0.01));
  CHECK(x.grad_at(2) == 1.0);  // subgradient at 0 chosen as 1
}

TEST_CASE("logsumexp: analytic, stability and softmax gradient") {
  {
    Tape t;
    Tensor x = Tensor::from(Shape::vec(2), {0.0, 0.0});
    CHECK(logsumexp(t, x, 0, false).item() ==
          doctest::Approx(std::log(2.0)).epsilon(1e-15));
  }
  {
    // Extended-precision oracle: long double evaluates exp(1000) directly.
    Tape t;
    Tensor x = Tensor::from(Shape::vec(2), {1000.0, 1000.0});
    const double got = logsumexp(t, x, 0, false).item();
    CHECK(std::isfinite(got));
    const long double want = logl(expl(1000.0L) + expl(1000.0L));
    CHECK(spgtest::rel_err(got, static_cast<double>(want), 0.0) < 1e-15);
    CHECK(got == doctest::Approx(1000.0 + std::log(2.0)));
  }
  Rng rng = derive_rng(4, Stream::kTest, 0);
  for (int dim : {0, 1}) {
    Tensor x = rand_tensor(Shape::mat(3, 4), rng, true, -2.0, 2.0);
    auto value = [&]() {
      Tape t(false);
      return sum_all(t, logsumexp(t, x, dim, true)).item();
    };
    Tape t;
    Tensor loss = sum_all(t, logsumexp(t, x, dim, true));
    t.backward(loss);
    CHECK(spgtest::fd_check(value, {x}) < 1e-3);
    // Gradient must be the softmax along dim.
    for (int64_t i = 0; i < 3; ++i)
      for (int64_t j = 0; j < 4; ++j) {
        double denom = 0, num = std::exp(x.value()[i * 4 + j]);
        if (dim == 1)
          for (int64_t jj = 0; jj < 4; ++jj)
            denom += std::exp(x.value()[i * 4 + jj]);
        else
          for (int64_t ii = 0; ii < 3; ++ii)
            denom += std::exp(x.value()[ii * 4 + j]);
        CHECK(x.grad_at(i * 4 + j) ==
              doctest::Approx(num / denom).epsilon(1e-9));
      }
    x.zero_grad();
  }
}

TEST_CASE("elementwise/broadcast/reshape primitives pass finite differences") {
  Rng rng = derive_rng(5, Stream::kTest, 0);
  struct Case {
    const char* name;
    bool linear;
    std::function<Tensor(Tape&, Tensor&, Tensor&)> build;
  };
  const std::vector<Case> cases = {
      {"add", true, [](Tape& t, Tensor& a, Tensor& b) { return add(t, a, b); }},
      {"sub", true, [](Tape& t, Tensor& a, Tensor& b) { return sub(t, a, b); }},
      {"mul", false, [](Tape& t, Tensor& a, Tensor& b) { return mul(t, a, b); }},
      {"exp", false, [](Tape& t, Tensor& a, Tensor&) { return exp(t, a); }},
      {"tanh", false, [](Tape& t, Tensor& a, Tensor&) { return tanh(t, a); }},
      {"sigmoid", false,
       [](Tape& t, Tensor& a, Tensor&) { return sigmoid(t, a); }},
      {"leaky_relu", false,
       [](Tape& t, Tensor& a, Tensor&) { return leaky_relu(t, a); }},
      {"scale", true, [](Tape& t, Tensor& a, Tensor&) { return scale(t, a, -2.5); }},
      {"add_const", true,
       [](Tape& t, Tensor& a, Tensor&) { return add_const(t, a, 0.7); }},
      {"transpose", true,
       [](Tape& t, Tensor& a, Tensor&) { return transpose(t, a); }},
      {"reshape", true,
       [](Tape& t, Tensor& a, Tensor&) { return reshape(t, a, Shape::vec(12)); }},
      {"rowsum", true, [](Tape& t, Tensor& a, Tensor&) { return rowsum(t, a); }},
      {"mean_all", true,
       [](Tape& t, Tensor& a, Tensor&) { return mean_all(t, a); }},
      {"slice_rows", true,
       [](Tape& t, Tensor& a, Tensor&) { return slice_rows(t, a, 1, 3); }},
      {"slice_cols", true,
       [](Tape& t, Tensor& a, Tensor&) { return slice_cols(t, a, 1, 4); }},
      {"concat_cols", true,
       [](Tape& t, Tensor& a, Tensor& b) { return concat_cols(t, a, b); }},
  };
  for (const auto& c : cases) {
    CAPTURE(c.name);
    Tensor a = rand_tensor(Shape::mat(3, 4), rng);
    Tensor b = rand_tensor(Shape::mat(3, 4), rng);
    auto value = [&]() {
      Tape t(false);
      Tensor out = c.build(t, a, b);
      // Weighted sum keeps the loss sensitive to every output element.
      Tensor w = Tensor::full(out.shape(), 0.0);
      for (size_t i = 0; i < w.value().size(); ++i)
        w.value()[i] = 0.3 + 0.1 * static_cast<double>(i % 7);
      return sum_all(t, mul(t, out, w)).item();
    };
    Tape t;
    Tensor out = c.build(t, a, b);
    Tensor w = Tensor::full(out.shape(), 0.0);
    for (size_t i = 0; i < w.value().size(); ++i)
      w.value()[i] = 0.3 + 0.1 * static_cast<double>(i % 7);
    t.backward(sum_all(t, mul(t, out, w)));
    const double tol = c.linear ? 1e-6 : 1e-3;
    CHECK(spgtest::fd_check(value, {a, b}) < tol);
    a.zero_grad();
    b.zero_grad();
  }
}

TEST_CASE("add_rowvec, sub_bcast, bmm_nt, transpose01, time ops gradients") {
  Rng rng = derive_rng(6, Stream::kTest, 0);
  {
    Tensor a = rand_tensor(Shape::mat(4, 3), rng);
    Tensor v = rand_tensor(Shape::vec(3), rng);
    auto value = [&]() {
      Tape t(false);
      return sum_all(t, mul(t, add_rowvec(t, a, v), a)).item();
    };
    Tape t;
    t.backward(sum_all(t, mul(t, add_rowvec(t, a, v), a)));
    CHECK(spgtest::fd_check(value, {a, v}) < 1e-3);
  }
  for (bool over_last : {true, false}) {
    Tensor a = rand_tensor(Shape::cube(2, 3, 4), rng);
    auto build = [&](Tape& t) {
      Tensor r = logsumexp(t, a, over_last ? 2 : 1, true);
      return sum_all(t, mul(t, sub_bcast(t, a, r), a));
    };
    auto value = [&]() {
      Tape t(false);
      return build(t).item();
    };
    Tape t;
    t.backward(build(t));
    CHECK(spgtest::fd_check(value, {a}) < 1e-3);
    a.zero_grad();
  }
  {
    Tensor a = rand_tensor(Shape::cube(2, 3, 4), rng);
    Tensor b = rand_tensor(Shape::cube(2, 5, 4), rng);
    // Value check against naive loops.
    Tape tv(false);
    Tensor out = bmm_nt(tv, a, b);
    for (int64_t q = 0; q < 2; ++q)
      for (int64_t i = 0; i < 3; ++i)
        for (int64_t j = 0; j < 5; ++j) {
          double s = 0;
          for (int64_t kk = 0; kk < 4; ++kk)
            s += a.value()[(q * 3 + i) * 4 + kk] *
                 b.value()[(q * 5 + j) * 4 + kk];
          CHECK(out.value()[(q * 3 + i) * 5 + j] ==
                doctest::Approx(s).epsilon(1e-12));
        }
    auto value = [&]() {
      Tape t(false);
      Tensor o = bmm_nt(t, a, b);
      return mean_all(t, mul(t, o, o)).item();
    };
    Tape t;
    Tensor o = bmm_nt(t, a, b);
    t.backward(mean_all(t, mul(t, o, o)));
    CHECK(spgtest::fd_check(value, {a, b}) < 1e-3);
  }
  {
    Tensor a = rand_tensor(Shape::cube(3, 2, 4), rng);
    auto value = [&]() {
      Tape t(false);
      Tensor x = transpose01(t, a);
      Tensor s0 = slice_time(t, reverse_time(t, x), 0);
      return sum_all(t, mul(t, s0, s0)).item();
    };
    Tape t;
    Tensor x = transpose01(t, a);
    Tensor s0 = slice_time(t, reverse_time(t, x), 0);
    t.backward(sum_all(t, mul(t, s0, s0)));
    CHECK(spgtest::fd_check(value, {a}) < 1e-3);
  }
  {
    std::vector<Tensor> steps = {rand_tensor(Shape::mat(2, 3), rng),
                                 rand_tensor(Shape::mat(2, 3), rng)};
    auto value = [&]() {
      Tape t(false);
      Tensor st = stack_time(t, steps);
      return sum_all(t, mul(t, st, st)).item();
    };
    Tape t;
    Tensor st = stack_time(t, steps);
    t.backward(sum_all(t, mul(t, st, st)));
    CHECK(spgtest::fd_check(value, steps) < 1e-3);
  }
}

TEST_CASE("tape replay is bit-deterministic") {
  auto run = [](uint64_t seed) {
    Rng rng = derive_rng(seed, Stream::kTest, 3);
    Tensor a = rand_tensor(Shape::mat(6, 5), rng);
    Tensor b = rand_tensor(Shape::mat(5, 6), rng);
    Tape t;
    Tensor out = tanh(t, matmul(t, a, b));
    Tensor loss = mean_all(t, mul(t, out, out));
    t.backward(loss);
    return std::make_tuple(out.value(), a.grad(), b.grad(), loss.item());
  };
  auto r1 = run(42);
  auto r2 = run(42);
  CHECK(std::get<0>(r1) == std::get<0>(r2));
  CHECK(std::get<1>(r1) == std::get<1>(r2));
  CHECK(std::get<2>(r1) == std::get<2>(r2));
  CHECK(std::get<3>(r1) == std::get<3>(r2));
}

TEST_CASE("batchnorm forward semantics") {
  Rng rng = derive_rng(7, Stream::kTest, 0);
  BatchNorm bn(3);
  {
    // Constant column normalizes to zero before scale/shift.
    Tape t;
    std::vector<double> xv(4 * 3);
    for (int i = 0; i < 4; ++i) {
      xv[i * 3 + 0] = 5.0;
      xv[i * 3 + 1] = static_cast<double>(i);
      xv[i * 3 + 2] = -2.0;
    }
    Tensor x = Tensor::from(Shape::mat(4, 3), xv);
    Tensor y = batchnorm(t, x, bn, BnMode::kTrainNoUpdate);
    for (int i = 0; i < 4; ++i) {
      CHECK(y.value()[i * 3 + 0] == doctest::Approx(0.0).epsilon(1e-12));
      CHECK(y.value()[i * 3 + 2] == doctest::Approx(0.0).epsilon(1e-12));
    }
  }
  {
    // Mean-0 var-1 column passes through within the eps tolerance.
    Tape t;
    Tensor x = Tensor::from(Shape::mat(2, 1), {-1.0, 1.0});
    BatchNorm bn1(1);
    Tensor y = batchnorm(t, x, bn1, BnMode::kTrainNoUpdate);
    CHECK(std::fabs(y.value()[0] + 1.0) < 1e-5);
    CHECK(std::fabs(y.value()[1] - 1.0) < 1e-5);
  }
  {
    // Training batch of one row is an error (undefined variance).
    Tape t;
    Tensor x = Tensor::from(Shape::mat(1, 3), {1.0, 2.0, 3.0});
    CHECK_THROWS_AS(batchnorm(t, x, bn, BnMode::kTrain), ShapeError);
  }
  {
    // Running stats follow the exponentially weighted scalar recurrence.
    BatchNorm bn1(1);
    double rm = 0.0, rv = 1.0;
    for (int k = 0; k < 5; ++k) {
      Tape t;
      Tensor x = rand_tensor(Shape::mat(6, 1), rng, false, -2.0, 2.0);
      batchnorm(t, x, bn1, BnMode::kTrain);
      double mean = 0, var = 0;
      for (double v : x.value()) mean += v;
      mean /= 6;
      for (double v : x.value()) var += (v - mean) * (v - mean);
      var /= 6;
      rm = 0.9 * rm + 0.1 * mean;
      rv = 0.9 * rv + 0.1 * var * 6.0 / 5.0;  // unbiased in the running stat
      CHECK(bn1.running_mean[0] == doctest::Approx(rm).epsilon(1e-12));
      CHECK(bn1.running_var[0] == doctest::Approx(rv).epsilon(1e-12));
    }
    // kTrainNoUpdate leaves them alone.
    const double rm_before = bn1.running_mean[0];
    Tape t;
    Tensor x = rand_tensor(Shape::mat(6, 1), rng, false);
    batchnorm(t, x, bn1, BnMode::kTrainNoUpdate);
    CHECK(bn1.running_mean[0] == rm_before);
  }
}

TEST_CASE("batchnorm gradients (train and eval modes)") {
  Rng rng = derive_rng(8, Stream::kTest, 0);
  for (BnMode mode : {BnMode::kTrainNoUpdate, BnMode::kEval}) {
    BatchNorm bn(3);
    // Non-trivial scale/shift and running stats.
    Rng r2 = derive_rng(9, Stream::kTest, 1);
    bn.gamma.value() = spgtest::random_vec(3, r2, 0.5, 1.5);
    bn.beta.value() = spgtest::random_vec(3, r2, -0.5, 0.5);
    bn.running_mean = spgtest::random_vec(3, r2, -0.3, 0.3);
    bn.running_var = spgtest::random_vec(3, r2, 0.5, 1.5);
    Tensor x = rand_tensor(Shape::mat(5, 3), rng);
    auto value = [&]() {
      Tape t(false);
      Tensor y = batchnorm(t, x, bn, mode);
      return sum_all(t, mul(t, y, y)).item();
    };
    Tape t;
    Tensor y = batchnorm(t, x, bn, mode);
    t.backward(sum_all(t, mul(t, y, y)));
    CHECK(spgtest::fd_check(value, {x, bn.gamma, bn.beta}) < 1e-3);
  }
}

TEST_CASE("sinkhorn layer gradient through the tape") {
  Rng rng = derive_rng(10, Stream::kTest, 0);
  Tensor x = rand_tensor(Shape::mat(4, 4), rng, true, -1.0, 1.0);
  Tensor w = Tensor::uniform(Shape::mat(4, 4), -1.0, 1.0, rng, false);
  auto value = [&]() {
    Tape t(false);
    return sum_all(t, mul(t, ad::sinkhorn(t, x, 0.05, 10), w)).item();
  };
  Tape t;
  t.backward(sum_all(t, mul(t, ad::sinkhorn(t, x, 0.05, 10), w)));
  CHECK(spgtest::fd_check(value, {x}) < 1e-3);
}
