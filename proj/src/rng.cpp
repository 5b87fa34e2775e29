#include "nnadapt/rng.hpp"

#include <cmath>
#include <numbers>

namespace nnadapt {

uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

double SeededRng::normal(double mean, double stddev) {
  // Map to (0,1] so log() is safe.
  double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  double u2 = uniform01();
  double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  return mean + stddev * z;
}

void SeededRng::shuffle(std::vector<int>& v) {
  for (size_t i = v.size(); i > 1; --i) {
    size_t j = uniform_index(i);
    std::swap(v[i - 1], v[j]);
  }
}

SeededRng SeededRng::derive(const std::string& tag) const {
  return SeededRng(splitmix64(seed_ ^ fnv1a64(tag)));
}

SeededRng SeededRng::derive(uint64_t tag) const {
  return SeededRng(splitmix64(seed_ ^ splitmix64(tag)));
}

}  // namespace nnadapt
