#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace negmtl {

using Rng = std::mt19937_64;

// Deterministic, name-keyed generator streams derived from one run seed.
// Streams with different names are seeded independently, so drawing from
// one never shifts another.
class RngStreams {
 public:
  explicit RngStreams(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }
  Rng stream(std::string_view name) const;

 private:
  std::uint64_t seed_;
};

// 64-bit FNV-1a.
constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

inline Rng RngStreams::stream(std::string_view name) const {
  const std::uint64_t key = fnv1a(name);
  std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                    static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)};
  return Rng(seq);
}

}  // namespace negmtl
