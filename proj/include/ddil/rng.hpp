#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ddil {

using Rng = std::mt19937_64;

// Named, independent random streams derived from one run seed. Each purpose
// (initial noise, model-selection coins, data sampling, ...) gets its own
// stream so that changing how often one is consumed never shifts another.
class RngStreams {
 public:
  explicit RngStreams(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t derive(std::string_view name) const {
    // FNV-1a over the name, mixed with the seed through splitmix64.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : name) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
    return splitmix64(seed_ ^ splitmix64(h));
  }

  Rng stream(std::string_view name) const { return Rng(derive(name)); }

  static std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

 private:
  std::uint64_t seed_;
};

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

inline double standard_normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

// Uniform index in [0, n).
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

}  // namespace ddil
