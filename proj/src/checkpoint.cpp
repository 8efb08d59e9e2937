#include "spg/checkpoint.hpp"

#include "binio.hpp"
#include "spg/errors.hpp"

namespace spg {

namespace {
constexpr char kMagic[4] = {'S', 'P', 'G', 'C'};
constexpr uint32_t kVersion = 1;
}  // namespace

void save_checkpoint(const std::string& path,
                     const std::vector<CheckpointEntry>& entries) {
  std::vector<uint8_t> buf;
  io::put_bytes(buf, kMagic, 4);
  io::put_le<uint32_t>(buf, kVersion);
  io::put_le<uint64_t>(buf, entries.size());
  for (const auto& e : entries) {
    if (e.numel() != e.data.size())
      throw DataError("checkpoint entry '" + e.name + "': dims say " +
                      std::to_string(e.numel()) + " values, have " +
                      std::to_string(e.data.size()));
    io::put_le<uint32_t>(buf, static_cast<uint32_t>(e.name.size()));
    io::put_bytes(buf, e.name.data(), e.name.size());
    io::put_le<uint64_t>(buf, e.dims.size());
    for (auto d : e.dims) io::put_le<uint64_t>(buf, d);
    io::put_f64(buf, e.data.data(), e.data.size());
  }
  io::write_file(path, buf);
}

std::vector<CheckpointEntry> load_checkpoint(const std::string& path) {
  const auto buf = io::read_file(path);
  io::Reader r(buf.data(), buf.size(), "checkpoint " + path);
  r.need(4);
  if (r.get_string(4) != std::string(kMagic, 4))
    throw DataError("checkpoint " + path + ": bad magic");
  const auto version = r.get<uint32_t>();
  if (version != kVersion)
    throw DataError("checkpoint " + path + ": unsupported version " +
                    std::to_string(version));
  const auto count = r.get<uint64_t>();
  std::vector<CheckpointEntry> entries;
  entries.reserve(count);
  for (uint64_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    const auto name_len = r.get<uint32_t>();
    e.name = r.get_string(name_len);
    const auto rank = r.get<uint64_t>();
    if (rank > 8)
      throw DataError("checkpoint " + path + ": implausible rank " +
                      std::to_string(rank) + " for '" + e.name + "'");
    e.dims.resize(rank);
    for (auto& d : e.dims) d = r.get<uint64_t>();
    e.data.resize(e.numel());
    r.get_f64(e.data.data(), e.data.size());
    entries.push_back(std::move(e));
  }
  if (r.remaining() != 0)
    throw DataError("checkpoint " + path + ": trailing bytes");
  return entries;
}

std::map<std::string, CheckpointEntry> checkpoint_index(
    std::vector<CheckpointEntry> entries) {
  std::map<std::string, CheckpointEntry> m;
  for (auto& e : entries) {
    auto name = e.name;
    m.emplace(std::move(name), std::move(e));
  }
  return m;
}

}  // namespace spg
