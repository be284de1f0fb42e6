#pragma once

// Little-endian primitive IO for the binary container formats. Explicit byte
// composition keeps the files identical across host endianness.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "faser/types.hpp"

namespace faser::binio {

inline void write_u32(std::ostream& out, uint32_t v) {
  char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff),
               char((v >> 24) & 0xff)};
  out.write(b, 4);
}

inline void write_u64(std::ostream& out, uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = char((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

inline void write_f32(std::ostream& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  write_u32(out, bits);
}

inline void write_f32_array(std::ostream& out, const float* data, size_t n) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * 4));
  } else {
    for (size_t i = 0; i < n; ++i) write_f32(out, data[i]);
  }
}

inline void write_string(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw ContractError("unexpected end of binary file");
  return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
}

inline uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw ContractError("unexpected end of binary file");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= uint64_t(b[i]) << (8 * i);
  return v;
}

inline float read_f32(std::istream& in) {
  uint32_t bits = read_u32(in);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

inline void read_f32_array(std::istream& in, float* data, size_t n) {
  if constexpr (std::endian::native == std::endian::little) {
    in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * 4));
    if (!in) throw ContractError("unexpected end of binary file");
  } else {
    for (size_t i = 0; i < n; ++i) data[i] = read_f32(in);
  }
}

inline std::string read_string(std::istream& in, uint32_t max_len = 1u << 20) {
  uint32_t n = read_u32(in);
  if (n > max_len) throw ContractError("string length field out of range");
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw ContractError("unexpected end of binary file");
  return s;
}

}  // namespace faser::binio
