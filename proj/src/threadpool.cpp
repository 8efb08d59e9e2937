#include "spg/threadpool.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>

namespace spg {

ThreadPool::ThreadPool(int threads) {
  const int extra = std::max(0, threads - 1);
  pending_.assign(extra, false);
  ranges_.assign(extra, {0, 0});
  workers_.reserve(extra);
  for (int i = 0; i < extra; ++i)
    workers_.emplace_back([this, i] { worker_loop(i); });
}

ThreadPool::~ThreadPool() {
  {
    std::lock_guard<std::mutex> lk(mu_);
    stop_ = true;
  }
  cv_work_.notify_all();
  for (auto& w : workers_) w.join();
}

void ThreadPool::worker_loop(int slot) {
  uint64_t seen = 0;
  for (;;) {
    Range r{0, 0};
    const std::function<void(int64_t)>* fn = nullptr;
    {
      std::unique_lock<std::mutex> lk(mu_);
      cv_work_.wait(lk, [&] { return stop_ || (epoch_ != seen && pending_[slot]); });
      if (stop_) return;
      seen = epoch_;
      r = ranges_[slot];
      fn = fn_;
      pending_[slot] = false;
    }
    for (int64_t i = r.begin; i < r.end; ++i) (*fn)(i);
    {
      std::lock_guard<std::mutex> lk(mu_);
      if (--outstanding_ == 0) cv_done_.notify_one();
    }
  }
}

void ThreadPool::parallel_for(int64_t begin, int64_t end,
                              const std::function<void(int64_t)>& fn) {
  const int64_t total = end - begin;
  if (total <= 0) return;
  const int nworkers = static_cast<int>(workers_.size());
  if (nworkers == 0 || total == 1) {
    for (int64_t i = begin; i < end; ++i) fn(i);
    return;
  }
  const int parts = std::min<int64_t>(nworkers + 1, total);
  const int64_t chunk = (total + parts - 1) / parts;
  Range own{begin, std::min(end, begin + chunk)};
  {
    std::lock_guard<std::mutex> lk(mu_);
    fn_ = &fn;
    outstanding_ = 0;
    for (int s = 0; s < nworkers; ++s) {
      const int64_t b = begin + chunk * (s + 1);
      const int64_t e = std::min(end, b + chunk);
      if (b < e) {
        ranges_[s] = {b, e};
        pending_[s] = true;
        ++outstanding_;
      } else {
        pending_[s] = false;
      }
    }
    ++epoch_;
  }
  cv_work_.notify_all();
  for (int64_t i = own.begin; i < own.end; ++i) fn(i);
  std::unique_lock<std::mutex> lk(mu_);
  cv_done_.wait(lk, [&] { return outstanding_ == 0; });
  fn_ = nullptr;
}

int configured_threads() {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw <= 0) hw = 1;
  if (const char* env = std::getenv("SPG_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return std::min(v, 256);
  }
  return hw;
}

ThreadPool& global_pool() {
  static ThreadPool pool(configured_threads());
  return pool;
}

}  // namespace spg
