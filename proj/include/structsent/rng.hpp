#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace structsent {

// Seed mixing and double generation are done by hand so that every stream is
// bit-reproducible across standard libraries (std distributions are not).

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ splitmix64(b));
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// Uniform draw in [0, 1) using the top 53 bits of the generator output.
inline double uniform_unit(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1p-53;
}

inline double uniform_in(std::mt19937_64& gen, double lo, double hi) {
  return lo + (hi - lo) * uniform_unit(gen);
}

}  // namespace structsent
