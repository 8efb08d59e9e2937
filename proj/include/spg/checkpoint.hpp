#pragma once

// Flat binary checkpoint of named f64 arrays.
// Layout: magic "SPGC", version u32, entry count u64, then per entry:
// name length u32, UTF-8 name, rank u64, dims u64×rank, f64 payload
// (little-endian). Optimizer state lives under the "/adam/" name prefix.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace spg {

struct CheckpointEntry {
  std::string name;
  std::vector<uint64_t> dims;
  std::vector<double> data;

  uint64_t numel() const {
    uint64_t n = 1;
    for (auto d : dims) n *= d;
    return dims.empty() ? 0 : n;
  }
};

void save_checkpoint(const std::string& path,
                     const std::vector<CheckpointEntry>& entries);

// Preserves file order; throws DataError on bad magic/version/truncation.
std::vector<CheckpointEntry> load_checkpoint(const std::string& path);

std::map<std::string, CheckpointEntry> checkpoint_index(
    std::vector<CheckpointEntry> entries);

}  // namespace spg
