#include "spg/tensor.hpp"

#include <unordered_map>

namespace spg::ad {

namespace detail {

namespace {
struct BufferPool {
  std::unordered_map<size_t, std::vector<std::vector<double>>> buckets;
  static constexpr size_t kMaxPerBucket = 64;
};
BufferPool& pool() {
  static thread_local BufferPool p;
  return p;
}
}  // namespace

std::vector<double> pool_take(size_t n) {
  if (n == 0) return {};
  auto& bucket = pool().buckets[n];
  if (!bucket.empty()) {
    std::vector<double> v = std::move(bucket.back());
    bucket.pop_back();
    return v;
  }
  return std::vector<double>(n);
}

void pool_give(std::vector<double>&& v) {
  if (v.empty()) return;
  auto& bucket = pool().buckets[v.size()];
  if (bucket.size() < BufferPool::kMaxPerBucket)
    bucket.push_back(std::move(v));
}

}  // namespace detail

std::string Shape::str() const {
  std::string s = "(";
  for (int i = 0; i < rank; ++i) {
    if (i) s += "x";
    s += std::to_string(d[i]);
  }
  return s + ")";
}

Tensor Tensor::zeros(Shape s, bool requires_grad) {
  auto p = std::make_shared<TensorData>();
  p->shape = s;
  p->value = detail::pool_take(static_cast<size_t>(s.numel()));
  std::fill(p->value.begin(), p->value.end(), 0.0);
  p->requires_grad = requires_grad;
  return Tensor(std::move(p));
}

Tensor Tensor::uninit(Shape s) {
  auto p = std::make_shared<TensorData>();
  p->shape = s;
  p->value = detail::pool_take(static_cast<size_t>(s.numel()));
  return Tensor(std::move(p));
}

Tensor Tensor::from(Shape s, std::vector<double> vals, bool requires_grad) {
  if (static_cast<int64_t>(vals.size()) != s.numel())
    throw ShapeError("tensor init: " + std::to_string(vals.size()) +
                     " values for shape " + s.str());
  auto p = std::make_shared<TensorData>();
  p->shape = s;
  p->value = std::move(vals);
  p->requires_grad = requires_grad;
  return Tensor(std::move(p));
}

Tensor Tensor::full(Shape s, double v, bool requires_grad) {
  auto p = std::make_shared<TensorData>();
  p->shape = s;
  p->value.assign(static_cast<size_t>(s.numel()), v);
  p->requires_grad = requires_grad;
  return Tensor(std::move(p));
}

Tensor Tensor::uniform(Shape s, double lo, double hi, Rng& rng,
                       bool requires_grad) {
  auto p = std::make_shared<TensorData>();
  p->shape = s;
  p->value.resize(static_cast<size_t>(s.numel()));
  for (auto& v : p->value) v = rng.uniform(lo, hi);
  p->requires_grad = requires_grad;
  return Tensor(std::move(p));
}

void Tape::backward(const Tensor& loss) {
  if (loss.shape().numel() != 1)
    throw ShapeError("backward() needs a scalar loss, got shape " +
                     loss.shape().str());
  loss.data()->grad_data()[0] += 1.0;
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    TensorData* node = it->get();
    if (node->grad.empty() || !node->backward_fn) continue;
    node->backward_fn();
  }
}

}  // namespace spg::ad
