#pragma once

// Little-endian primitives shared by the VXG1 and VXL1 readers/writers.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <type_traits>

#include "voxclust/errors.hpp"

namespace voxclust::detail {

template <typename T>
T byteswap_if_big(T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

template <typename T>
void write_le(std::ostream& out, T v) {
  v = byteswap_if_big(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
bool read_le(std::istream& in, T& v) {
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) return false;
  v = byteswap_if_big(v);
  return true;
}

// Bulk payload I/O; chunked so the byte-swap path (if ever taken) stays bounded.
template <typename T>
void write_payload(std::ostream& out, const T* data, std::uint64_t count) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(T)));
  } else {
    for (std::uint64_t i = 0; i < count; ++i) write_le(out, data[i]);
  }
}

template <typename T>
std::uint64_t read_payload(std::istream& in, T* data, std::uint64_t count) {
  if constexpr (std::endian::native == std::endian::little) {
    in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * sizeof(T)));
    return static_cast<std::uint64_t>(in.gcount()) / sizeof(T);
  } else {
    std::uint64_t i = 0;
    for (; i < count; ++i) {
      if (!read_le(in, data[i])) break;
    }
    return i;
  }
}

inline std::ofstream open_for_write(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  return out;
}

inline std::ifstream open_for_read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  return in;
}

}  // namespace voxclust::detail
