#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace apga {

// FNV-1a, used for seed derivation, filename-hash splits and parameter
// fingerprints.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t fnv1a64(const void* data, std::size_t n) {
  return fnv1a64(std::string_view(static_cast<const char*>(data), n));
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Derives an independent stream seed from a run seed and a purpose tag.
// Streams for init, data shuffling, cutout placement etc. never collide.
inline std::uint64_t mix_seed(std::uint64_t seed, std::string_view tag,
                              std::uint64_t counter = 0) {
  return splitmix64(seed ^ splitmix64(fnv1a64(tag) + counter));
}

inline std::mt19937_64 make_engine(std::uint64_t seed, std::string_view tag,
                                   std::uint64_t counter = 0) {
  return std::mt19937_64(mix_seed(seed, tag, counter));
}

}  // namespace apga
