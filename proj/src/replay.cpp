#include "spg/replay.hpp"

#include "binio.hpp"

namespace spg {

namespace {
constexpr char kMagic[4] = {'S', 'P', 'G', 'B'};
constexpr uint32_t kVersion = 1;
}  // namespace

ReplayBuffer::ReplayBuffer(uint64_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay buffer capacity must be >= 1");
}

ReplayBuffer ReplayBuffer::restore(uint64_t capacity, uint64_t inserted,
                                   std::vector<Experience> slots) {
  if (slots.size() > capacity)
    throw DataError("replay restore: more slots than capacity");
  if (inserted < slots.size() ||
      (slots.size() < capacity && inserted != slots.size()))
    throw DataError("replay restore: inconsistent insert count");
  ReplayBuffer buf(capacity);
  buf.store_ = std::move(slots);
  buf.inserted_ = inserted;
  return buf;
}

void ReplayBuffer::push(Experience e) {
  if (store_.size() < capacity_) {
    store_.push_back(std::move(e));
  } else {
    store_[inserted_ % capacity_] = std::move(e);
  }
  ++inserted_;
}

const Experience& ReplayBuffer::sample(Rng& rng) const {
  if (store_.empty()) throw ShapeError("replay buffer: sample from empty");
  return store_[rng.below(store_.size())];
}

void save_buffer(const std::string& path, const ReplayBuffer& buf, Task task,
                 int n) {
  std::vector<uint8_t> out;
  io::put_bytes(out, kMagic, 4);
  io::put_le<uint32_t>(out, kVersion);
  io::put_le<uint8_t>(out, static_cast<uint8_t>(task));
  io::put_le<uint32_t>(out, static_cast<uint32_t>(n));
  io::put_le<uint64_t>(out, buf.capacity());
  io::put_le<uint64_t>(out, buf.inserted());
  io::put_le<uint64_t>(out, buf.size());
  const int64_t rec = record_size(task, n);
  for (uint64_t i = 0; i < buf.size(); ++i) {
    const Experience& e = buf.at(i);
    if (static_cast<int64_t>(e.state.feat.size()) != rec ||
        e.soft.size() != static_cast<size_t>(n) * n || e.hard.n() != n)
      throw DataError("buffer save: malformed experience record");
    io::put_f64(out, e.state.feat.data(), e.state.feat.size());
    io::put_f64(out, e.soft.data(), e.soft.size());
    for (int32_t v : e.hard.perm) io::put_le<int32_t>(out, v);
    io::put_le<double>(out, e.reward);
  }
  io::write_file(path, out);
}

ReplayBuffer load_buffer(const std::string& path, Task task, int n) {
  const auto data = io::read_file(path);
  io::Reader r(data.data(), data.size(), "buffer " + path);
  if (r.get_string(4) != std::string(kMagic, 4))
    throw DataError("buffer " + path + ": bad magic");
  if (r.get<uint32_t>() != kVersion)
    throw DataError("buffer " + path + ": unsupported version");
  if (r.get<uint8_t>() != static_cast<uint8_t>(task))
    throw DataError("buffer " + path + ": task mismatch");
  if (r.get<uint32_t>() != static_cast<uint32_t>(n))
    throw DataError("buffer " + path + ": N mismatch");
  const auto capacity = r.get<uint64_t>();
  const auto inserted = r.get<uint64_t>();
  const auto size = r.get<uint64_t>();
  const int64_t rec = record_size(task, n);
  std::vector<Experience> slots(size);
  for (auto& e : slots) {
    e.state.n = n;
    e.state.feat.resize(rec);
    r.get_f64(e.state.feat.data(), e.state.feat.size());
    e.soft.resize(static_cast<size_t>(n) * n);
    r.get_f64(e.soft.data(), e.soft.size());
    e.hard.perm.resize(n);
    for (auto& v : e.hard.perm) v = r.get<int32_t>();
    e.reward = r.get<double>();
  }
  if (r.remaining() != 0)
    throw DataError("buffer " + path + ": trailing bytes");
  return ReplayBuffer::restore(capacity, inserted, std::move(slots));
}

}  // namespace spg
