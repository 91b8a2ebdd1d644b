#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cautious {

// Every random decision in the toolkit draws from an engine seeded through
// substream_seed(base, name[, index]), so one manifest seed reproduces a whole
// experiment and independent concerns (shuffle, spawn, noise, init) never
// share a stream.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t substream_seed(std::uint64_t base, std::string_view name,
                                    std::uint64_t index = 0) {
  return splitmix64(splitmix64(base ^ fnv1a64(name)) ^ index);
}

inline std::mt19937_64 make_engine(std::uint64_t base, std::string_view name,
                                   std::uint64_t index = 0) {
  return std::mt19937_64(substream_seed(base, name, index));
}

}  // namespace cautious
