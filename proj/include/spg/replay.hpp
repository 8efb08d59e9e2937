#pragma once

// FIFO experience replay with uniform sampling. At capacity, the oldest
// record is overwritten. Optional binary dump ("SPGB") so a training run can
// resume bit-identically.

#include <string>
#include <vector>

#include "spg/envs.hpp"

namespace spg {

struct Experience {
  Instance state;
  std::vector<double> soft;  // N×N relaxed action, row-major
  PermutationMatrix hard;
  double reward = 0.0;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(uint64_t capacity);
  // Rebuilds a buffer with its ring cursor mid-cycle (checkpoint resume).
  static ReplayBuffer restore(uint64_t capacity, uint64_t inserted,
                              std::vector<Experience> slots);

  void push(Experience e);
  uint64_t size() const { return store_.size(); }
  uint64_t capacity() const { return capacity_; }
  uint64_t inserted() const { return inserted_; }

  // Storage-slot access (owners iterate for consistency checks).
  const Experience& at(uint64_t slot) const { return store_[slot]; }
  const Experience& sample(Rng& rng) const;

 private:
  uint64_t capacity_;
  uint64_t inserted_ = 0;
  std::vector<Experience> store_;
};

void save_buffer(const std::string& path, const ReplayBuffer& buf, Task task,
                 int n);
ReplayBuffer load_buffer(const std::string& path, Task task, int n);

}  // namespace spg
