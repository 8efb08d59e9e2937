#pragma once

// Small static-partition thread pool. Worker count is capped by the
// SPG_THREADS environment variable (default: hardware concurrency). Work is
// split into contiguous index ranges, so results never depend on the number
// of workers as long as per-index work is independent.

#include <condition_variable>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace spg {

class ThreadPool {
 public:
  explicit ThreadPool(int threads);
  ~ThreadPool();

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  int threads() const { return static_cast<int>(workers_.size()) + 1; }

  // Runs fn(i) for i in [begin, end); blocks until done. The calling thread
  // participates.
  void parallel_for(int64_t begin, int64_t end,
                    const std::function<void(int64_t)>& fn);

 private:
  struct Range {
    int64_t begin, end;
  };
  void worker_loop(int slot);

  std::vector<std::thread> workers_;
  std::mutex mu_;
  std::condition_variable cv_work_, cv_done_;
  const std::function<void(int64_t)>* fn_ = nullptr;
  std::vector<Range> ranges_;
  std::vector<bool> pending_;
  int outstanding_ = 0;
  uint64_t epoch_ = 0;
  bool stop_ = false;
};

int configured_threads();
ThreadPool& global_pool();

}  // namespace spg
