#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace nnadapt {

// Deterministic random source. mt19937_64 gives a portable bit stream; the
// uniform/normal transforms are implemented here rather than through
// std::*_distribution so that draw sequences are identical across standard
// library implementations. Single-owner: never share one instance across
// concurrent callers.
class SeededRng {
 public:
  explicit SeededRng(uint64_t seed) : seed_(seed), engine_(seed) {}

  uint64_t seed() const { return seed_; }

  uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1), 53-bit mantissa.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [0, n). n must be > 0.
  uint64_t uniform_index(uint64_t n) { return next_u64() % n; }

  // Box-Muller; consumes two draws per call.
  double normal(double mean, double stddev);

  // Fisher-Yates.
  void shuffle(std::vector<int>& v);

  // Child generator with a seed derived from this seed and a tag. Used to
  // give each phase/epoch its own stream from one master seed.
  SeededRng derive(const std::string& tag) const;
  SeededRng derive(uint64_t tag) const;

 private:
  uint64_t seed_;
  std::mt19937_64 engine_;
};

uint64_t splitmix64(uint64_t x);
uint64_t fnv1a64(const std::string& s);

}  // namespace nnadapt
