#pragma once

// Raw little-endian binary helpers for checkpoints. Not portable across
// architectures with different endianness or type sizes.

#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <type_traits>
#include <vector>

#include "cocorrect/errors.hpp"

namespace cocorrect::io {

template <typename T>
  requires std::is_trivially_copyable_v<T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
  requires std::is_trivially_copyable_v<T>
T read_pod(std::istream& in) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) throw LoadError("truncated binary stream");
  return value;
}

template <typename T>
void write_span(std::ostream& out, std::span<const T> values) {
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size_bytes()));
}

template <typename T>
void read_span(std::istream& in, std::span<T> values) {
  if (!in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()))) {
    throw LoadError("truncated binary stream");
  }
}

template <typename T>
void write_vector(std::ostream& out, const std::vector<T>& values) {
  write_pod(out, static_cast<std::uint64_t>(values.size()));
  write_span(out, std::span<const T>(values));
}

template <typename T>
std::vector<T> read_vector(std::istream& in) {
  const auto n = read_pod<std::uint64_t>(in);
  if (n > (std::uint64_t{1} << 34)) throw LoadError("implausible vector length in binary stream");
  std::vector<T> values(n);
  read_span(in, std::span<T>(values));
  return values;
}

}  // namespace cocorrect::io
