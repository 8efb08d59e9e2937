#pragma once

// Reverse-mode autodiff over dense f64 tensors of rank 1..3. Values are
// computed eagerly; a Tape records each op's backward closure in emission
// order and backward() replays them in exact reverse order. Leaves
// (parameters, inputs) live outside any tape and keep accumulated grads until
// explicitly zeroed. An empty grad buffer means "all zeros".

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "spg/errors.hpp"
#include "spg/rng.hpp"

namespace spg::ad {

struct Shape {
  int rank = 0;
  std::array<int64_t, 3> d{{0, 0, 0}};

  static Shape vec(int64_t n) { return Shape{1, {n, 0, 0}}; }
  static Shape mat(int64_t r, int64_t c) { return Shape{2, {r, c, 0}}; }
  static Shape cube(int64_t a, int64_t b, int64_t c) {
    return Shape{3, {a, b, c}};
  }

  int64_t numel() const {
    int64_t n = 1;
    for (int i = 0; i < rank; ++i) n *= d[i];
    return rank == 0 ? 0 : n;
  }
  int64_t operator[](int i) const { return d[i]; }
  bool operator==(const Shape& o) const {
    if (rank != o.rank) return false;
    for (int i = 0; i < rank; ++i)
      if (d[i] != o.d[i]) return false;
    return true;
  }
  std::string str() const;
};

namespace detail {
// Thread-local free lists of f64 buffers, bucketed by size. Graph turnover
// allocates thousands of identically-sized buffers per training step; the
// pool removes the malloc/zero-fill cost for op outputs that are fully
// overwritten anyway.
std::vector<double> pool_take(size_t n);
void pool_give(std::vector<double>&& v);
}  // namespace detail

class TensorData {
 public:
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty == zeros
  bool requires_grad = false;
  std::function<void()> backward_fn;

  ~TensorData() {
    detail::pool_give(std::move(value));
    detail::pool_give(std::move(grad));
  }

  // Zero-initialized grad buffer sized like value, allocated on first use.
  double* grad_data() {
    if (grad.empty()) {
      grad = detail::pool_take(value.size());
      std::fill(grad.begin(), grad.end(), 0.0);
    }
    return grad.data();
  }
  void zero_grad() {
    if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
  }
};

using TensorPtr = std::shared_ptr<TensorData>;

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(TensorPtr p) : p_(std::move(p)) {}

  static Tensor zeros(Shape s, bool requires_grad = false);
  // Pooled storage with stale contents; callers must overwrite every
  // element. Meant for op outputs.
  static Tensor uninit(Shape s);
  static Tensor from(Shape s, std::vector<double> vals,
                     bool requires_grad = false);
  static Tensor full(Shape s, double v, bool requires_grad = false);
  static Tensor uniform(Shape s, double lo, double hi, Rng& rng,
                        bool requires_grad = false);

  bool defined() const { return static_cast<bool>(p_); }
  const Shape& shape() const { return p_->shape; }
  std::vector<double>& value() { return p_->value; }
  const std::vector<double>& value() const { return p_->value; }
  const std::vector<double>& grad() const { return p_->grad; }
  double grad_at(int64_t i) const {
    return p_->grad.empty() ? 0.0 : p_->grad[i];
  }
  bool requires_grad() const { return p_->requires_grad; }
  void set_requires_grad(bool rg) { p_->requires_grad = rg; }
  void zero_grad() { p_->zero_grad(); }

  double item() const {
    if (p_->value.size() != 1)
      throw ShapeError("item() on non-scalar tensor of shape " +
                       p_->shape.str());
    return p_->value[0];
  }

  TensorData* data() const { return p_.get(); }
  const TensorPtr& ptr() const { return p_; }

 private:
  TensorPtr p_;
};

class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}

  bool recording() const { return recording_; }

  // Registers an op output created by an op function. Only called when the
  // op's result requires grad on a recording tape.
  void record(const Tensor& out) { order_.push_back(out.ptr()); }

  // Seeds d(loss)/d(loss) = 1 and replays backward closures in reverse
  // emission order. loss must be scalar.
  void backward(const Tensor& loss);

  size_t size() const { return order_.size(); }

 private:
  std::vector<TensorPtr> order_;
  bool recording_;
};

}  // namespace spg::ad
