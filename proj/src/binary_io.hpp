#pragma once

// Little-endian primitives for the checkpoint and feature containers.

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "grczsl/errors.hpp"

namespace grczsl::detail {

inline void write_u64(std::ostream& os, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(buf, 8);
}

inline void write_u32(std::ostream& os, std::uint32_t v) {
  char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(buf, 4);
}

inline void write_f64(std::ostream& os, double v) { write_u64(os, std::bit_cast<std::uint64_t>(v)); }

inline void write_bytes(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

// Reader that fails closed with the source name and byte offset on truncation.
class Reader {
 public:
  Reader(std::istream& is, std::string source) : is_(is), source_(std::move(source)) {}

  void read_raw(char* dst, std::size_t n, const char* what) {
    const auto offset = static_cast<long long>(is_.tellg());
    is_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n) {
      throw DataError(source_ + ": truncated while reading " + what + " at offset " + std::to_string(offset));
    }
  }

  std::uint64_t u64(const char* what) {
    unsigned char buf[8];
    read_raw(reinterpret_cast<char*>(buf), 8, what);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | buf[i];
    return v;
  }

  std::uint32_t u32(const char* what) {
    unsigned char buf[4];
    read_raw(reinterpret_cast<char*>(buf), 4, what);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | buf[i];
    return v;
  }

  std::uint8_t u8(const char* what) {
    char c;
    read_raw(&c, 1, what);
    return static_cast<std::uint8_t>(c);
  }

  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }

  std::string bytes(const char* what, std::size_t limit = 1u << 26) {
    const std::uint32_t n = u32(what);
    if (n > limit) throw DataError(source_ + ": implausible length " + std::to_string(n) + " for " + what);
    std::string s(n, '\0');
    read_raw(s.data(), n, what);
    return s;
  }

  void skip(std::uint64_t n, const char* what) {
    const auto offset = static_cast<long long>(is_.tellg());
    is_.seekg(static_cast<std::streamoff>(n), std::ios::cur);
    if (!is_) throw DataError(source_ + ": truncated while skipping " + what + " at offset " + std::to_string(offset));
  }

  long long offset() { return static_cast<long long>(is_.tellg()); }
  const std::string& source() const { return source_; }

 private:
  std::istream& is_;
  std::string source_;
};

}  // namespace grczsl::detail
