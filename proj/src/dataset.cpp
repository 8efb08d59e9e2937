#include "spg/dataset.hpp"

#include "binio.hpp"
#include "spg/threadpool.hpp"

namespace spg {

namespace {
constexpr char kMagic[4] = {'S', 'P', 'G', 'D'};
constexpr uint32_t kVersion = 1;
}  // namespace

int64_t dataset_header_bytes() { return 4 + 4 + 1 + 4 + 8 + 8; }

Dataset generate_dataset(Task task, int n, uint64_t count, uint64_t seed) {
  Dataset ds;
  ds.task = task;
  ds.n = n;
  ds.seed = seed;
  ds.instances.resize(count);
  auto& pool = global_pool();
  pool.parallel_for(0, static_cast<int64_t>(count), [&](int64_t i) {
    Rng rng = derive_rng(seed, Stream::kDataset, static_cast<uint64_t>(i));
    ds.instances[i] = gen_instance(task, n, rng);
  });
  return ds;
}

uint64_t test_split_seed(uint64_t base_seed) {
  return derive_seed(base_seed, Stream::kSplitSeed, 0);
}

void write_dataset(const std::string& path, const Dataset& ds) {
  std::vector<uint8_t> buf;
  buf.reserve(static_cast<size_t>(dataset_header_bytes()) +
              ds.count() * record_size(ds.task, ds.n) * sizeof(double));
  io::put_bytes(buf, kMagic, 4);
  io::put_le<uint32_t>(buf, kVersion);
  io::put_le<uint8_t>(buf, static_cast<uint8_t>(ds.task));
  io::put_le<uint32_t>(buf, static_cast<uint32_t>(ds.n));
  io::put_le<uint64_t>(buf, ds.count());
  io::put_le<uint64_t>(buf, ds.seed);
  const int64_t rec = record_size(ds.task, ds.n);
  for (const auto& inst : ds.instances) {
    if (static_cast<int64_t>(inst.feat.size()) != rec)
      throw DataError("dataset write: instance record size mismatch");
    io::put_f64(buf, inst.feat.data(), inst.feat.size());
  }
  io::write_file(path, buf);
}

Dataset read_dataset(const std::string& path) {
  const auto buf = io::read_file(path);
  io::Reader r(buf.data(), buf.size(), "dataset " + path);
  r.need(4);
  if (r.get_string(4) != std::string(kMagic, 4))
    throw DataError("dataset " + path + ": bad magic");
  const auto version = r.get<uint32_t>();
  if (version != kVersion)
    throw DataError("dataset " + path + ": unsupported version " +
                    std::to_string(version));
  const auto task_tag = r.get<uint8_t>();
  if (task_tag > 2)
    throw DataError("dataset " + path + ": bad task tag " +
                    std::to_string(task_tag));
  Dataset ds;
  ds.task = static_cast<Task>(task_tag);
  ds.n = static_cast<int>(r.get<uint32_t>());
  const auto count = r.get<uint64_t>();
  ds.seed = r.get<uint64_t>();
  const int64_t rec = record_size(ds.task, ds.n);
  if (r.remaining() != count * static_cast<uint64_t>(rec) * sizeof(double))
    throw DataError("dataset " + path + ": payload size " +
                    std::to_string(r.remaining()) + " does not match count " +
                    std::to_string(count));
  ds.instances.resize(count);
  for (auto& inst : ds.instances) {
    inst.n = ds.n;
    inst.feat.resize(rec);
    r.get_f64(inst.feat.data(), inst.feat.size());
  }
  return ds;
}

Dataset read_dataset_expect(const std::string& path, Task task, int n) {
  Dataset ds = read_dataset(path);
  if (ds.task != task)
    throw DataError("dataset " + path + ": task is " + task_name(ds.task) +
                    ", expected " + task_name(task));
  if (ds.n != n)
    throw DataError("dataset " + path + ": N is " + std::to_string(ds.n) +
                    ", expected " + std::to_string(n));
  return ds;
}

}  // namespace spg
