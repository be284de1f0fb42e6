#pragma once

// MurmurHash3 x64 128-bit (public domain, Austin Appleby) adapted to a
// fixed-seed digest helper. Used for dedup keys, store row ids and file
// fingerprints. Not cryptographic.

#include <array>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

namespace faser {

struct Digest128 {
  uint64_t lo = 0;
  uint64_t hi = 0;

  friend bool operator==(const Digest128&, const Digest128&) = default;
  friend auto operator<=>(const Digest128&, const Digest128&) = default;

  std::array<uint8_t, 16> bytes() const {
    std::array<uint8_t, 16> out{};
    for (int i = 0; i < 8; ++i) {
      out[i] = static_cast<uint8_t>(lo >> (8 * i));
      out[8 + i] = static_cast<uint8_t>(hi >> (8 * i));
    }
    return out;
  }

  std::string hex() const {
    static const char* digits = "0123456789abcdef";
    std::string s(32, '0');
    auto b = bytes();
    for (int i = 0; i < 16; ++i) {
      s[2 * i] = digits[b[i] >> 4];
      s[2 * i + 1] = digits[b[i] & 0xf];
    }
    return s;
  }
};

struct Digest128Hasher {
  size_t operator()(const Digest128& d) const noexcept {
    return static_cast<size_t>(d.lo ^ (d.hi * 0x9e3779b97f4a7c15ULL));
  }
};

namespace detail {

inline uint64_t rotl64(uint64_t x, int8_t r) { return (x << r) | (x >> (64 - r)); }

inline uint64_t fmix64(uint64_t k) {
  k ^= k >> 33;
  k *= 0xff51afd7ed558ccdULL;
  k ^= k >> 33;
  k *= 0xc4ceb9fe1a85ec53ULL;
  k ^= k >> 33;
  return k;
}

inline uint64_t load64(const uint8_t* p) {
  uint64_t v;
  std::memcpy(&v, p, sizeof(v));
  return v;  // little-endian host assumed for speed; digest stability is per-build
}

}  // namespace detail

inline Digest128 murmur3_128(const void* key, size_t len, uint32_t seed = 0x46415352u) {
  const uint8_t* data = static_cast<const uint8_t*>(key);
  const size_t nblocks = len / 16;

  uint64_t h1 = seed;
  uint64_t h2 = seed;
  const uint64_t c1 = 0x87c37b91114253d5ULL;
  const uint64_t c2 = 0x4cf5ad432745937fULL;

  for (size_t i = 0; i < nblocks; ++i) {
    uint64_t k1 = detail::load64(data + i * 16);
    uint64_t k2 = detail::load64(data + i * 16 + 8);

    k1 *= c1; k1 = detail::rotl64(k1, 31); k1 *= c2; h1 ^= k1;
    h1 = detail::rotl64(h1, 27); h1 += h2; h1 = h1 * 5 + 0x52dce729;

    k2 *= c2; k2 = detail::rotl64(k2, 33); k2 *= c1; h2 ^= k2;
    h2 = detail::rotl64(h2, 31); h2 += h1; h2 = h2 * 5 + 0x38495ab5;
  }

  const uint8_t* tail = data + nblocks * 16;
  uint64_t k1 = 0;
  uint64_t k2 = 0;
  switch (len & 15) {
    case 15: k2 ^= uint64_t(tail[14]) << 48; [[fallthrough]];
    case 14: k2 ^= uint64_t(tail[13]) << 40; [[fallthrough]];
    case 13: k2 ^= uint64_t(tail[12]) << 32; [[fallthrough]];
    case 12: k2 ^= uint64_t(tail[11]) << 24; [[fallthrough]];
    case 11: k2 ^= uint64_t(tail[10]) << 16; [[fallthrough]];
    case 10: k2 ^= uint64_t(tail[9]) << 8; [[fallthrough]];
    case 9:  k2 ^= uint64_t(tail[8]);
             k2 *= c2; k2 = detail::rotl64(k2, 33); k2 *= c1; h2 ^= k2;
             [[fallthrough]];
    case 8:  k1 ^= uint64_t(tail[7]) << 56; [[fallthrough]];
    case 7:  k1 ^= uint64_t(tail[6]) << 48; [[fallthrough]];
    case 6:  k1 ^= uint64_t(tail[5]) << 40; [[fallthrough]];
    case 5:  k1 ^= uint64_t(tail[4]) << 32; [[fallthrough]];
    case 4:  k1 ^= uint64_t(tail[3]) << 24; [[fallthrough]];
    case 3:  k1 ^= uint64_t(tail[2]) << 16; [[fallthrough]];
    case 2:  k1 ^= uint64_t(tail[1]) << 8; [[fallthrough]];
    case 1:  k1 ^= uint64_t(tail[0]);
             k1 *= c1; k1 = detail::rotl64(k1, 31); k1 *= c2; h1 ^= k1;
  }

  h1 ^= uint64_t(len);
  h2 ^= uint64_t(len);
  h1 += h2;
  h2 += h1;
  h1 = detail::fmix64(h1);
  h2 = detail::fmix64(h2);
  h1 += h2;
  h2 += h1;
  return Digest128{h1, h2};
}

inline Digest128 murmur3_128(std::string_view s, uint32_t seed = 0x46415352u) {
  return murmur3_128(s.data(), s.size(), seed);
}

}  // namespace faser
