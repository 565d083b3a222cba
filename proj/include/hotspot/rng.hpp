#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace hotspot {

// All randomness flows from one root seed through named substreams, so a
// change in one component does not perturb the draws of another.
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::mt19937_64 substream(std::uint64_t seed, std::string_view name) {
  return std::mt19937_64(splitmix64(seed ^ fnv1a(name)));
}

inline std::mt19937_64 substream(std::uint64_t seed, std::string_view name, std::uint64_t index) {
  return std::mt19937_64(splitmix64(splitmix64(seed ^ fnv1a(name)) + index));
}

// Derived seed for components that build their own generator.
inline std::uint64_t substream_seed(std::uint64_t seed, std::string_view name,
                                    std::uint64_t index) {
  return splitmix64(splitmix64(seed ^ fnv1a(name)) + index);
}

}  // namespace hotspot
