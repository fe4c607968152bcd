#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace softq {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives an independent seed for a named sub-stream, e.g.
// derive_seed(master, "dataset", {split, type, index}).
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view stream,
                                 std::initializer_list<std::uint64_t> keys = {}) {
  std::uint64_t h = splitmix64(master);
  for (char c : stream) h = splitmix64(h ^ static_cast<unsigned char>(c));
  for (std::uint64_t k : keys) h = splitmix64(h ^ k);
  return h;
}

// Thin wrapper over mt19937_64. The conversions are written out instead of
// using <random> distributions, whose output is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace softq
