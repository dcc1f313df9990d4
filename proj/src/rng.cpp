#include "leo/rng.hpp"

namespace leo {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Seed split_seed(Seed parent, std::uint64_t index) noexcept {
  return splitmix64(parent ^ splitmix64(index + 0x9E3779B97F4A7C15ULL));
}

Seed namespace_seed(Seed parent, std::string_view name) noexcept {
  // FNV-1a over the name, then mixed with the parent.
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return splitmix64(parent ^ splitmix64(h));
}

}  // namespace leo
