#pragma once

// Little-endian binary file helpers shared by the checkpoint and dataset
// formats. Reads validate bounds and throw DataError on truncation.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "spg/errors.hpp"

namespace spg::io {

inline void put_bytes(std::vector<uint8_t>& buf, const void* p, size_t n) {
  const auto* b = static_cast<const uint8_t*>(p);
  buf.insert(buf.end(), b, b + n);
}

template <typename T>
void put_le(std::vector<uint8_t>& buf, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  put_bytes(buf, &v, sizeof(T));  // x86-64 is little-endian
}

inline void put_f64(std::vector<uint8_t>& buf, const double* p, size_t n) {
  put_bytes(buf, p, n * sizeof(double));
}

class Reader {
 public:
  Reader(const uint8_t* data, size_t size, std::string what)
      : data_(data), size_(size), what_(std::move(what)) {}

  template <typename T>
  T get() {
    T v;
    need(sizeof(T));
    std::memcpy(&v, data_ + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  void get_f64(double* out, size_t n) {
    need(n * sizeof(double));
    std::memcpy(out, data_ + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
  }

  std::string get_string(size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
    pos_ += n;
    return s;
  }

  size_t remaining() const { return size_ - pos_; }
  void need(size_t n) const {
    if (pos_ + n > size_)
      throw DataError(what_ + ": truncated file (need " + std::to_string(n) +
                      " bytes at offset " + std::to_string(pos_) + ")");
  }

 private:
  const uint8_t* data_;
  size_t size_;
  size_t pos_ = 0;
  std::string what_;
};

inline void write_file(const std::string& path,
                       const std::vector<uint8_t>& buf) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open for writing: " + path);
  f.write(reinterpret_cast<const char*>(buf.data()),
          static_cast<std::streamsize>(buf.size()));
  if (!f) throw DataError("write failed: " + path);
}

inline std::vector<uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw DataError("cannot open: " + path);
  const std::streamsize size = f.tellg();
  f.seekg(0);
  std::vector<uint8_t> buf(static_cast<size_t>(size));
  f.read(reinterpret_cast<char*>(buf.data()), size);
  if (!f) throw DataError("read failed: " + path);
  return buf;
}

}  // namespace spg::io
