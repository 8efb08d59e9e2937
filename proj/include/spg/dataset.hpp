#pragma once

// Dataset persistence. File layout: magic "SPGD", version u32, task tag u8
// (0=sort, 1=mwm, 2=tsp), N u32, count u64, seed u64, then instances as
// little-endian f64 records concatenated in index order. Regeneration from
// (task, N, count, seed) is bit-identical: instance i draws from its own
// derived stream.

#include <string>
#include <vector>

#include "spg/envs.hpp"

namespace spg {

struct Dataset {
  Task task = Task::kSort;
  int n = 0;
  uint64_t seed = 0;
  std::vector<Instance> instances;

  uint64_t count() const { return instances.size(); }
};

Dataset generate_dataset(Task task, int n, uint64_t count, uint64_t seed);

// Seed for the held-out split belonging to base_seed.
uint64_t test_split_seed(uint64_t base_seed);

void write_dataset(const std::string& path, const Dataset& ds);
Dataset read_dataset(const std::string& path);
// Validates task and N; DataError on mismatch.
Dataset read_dataset_expect(const std::string& path, Task task, int n);

int64_t dataset_header_bytes();

}  // namespace spg
