#pragma once

// Seedable random streams with portable sampling. Distribution draws are
// implemented by hand because the std:: distributions are not bit-stable
// across standard library implementations.

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace dmd {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d4da33d06ed1a3ULL;
  return x ^ (x >> 31);
}

inline uint64_t hash_name(std::string_view name) {
  uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// One named stream derived from a root seed.
class Rng {
 public:
  Rng() : gen_(0) {}
  Rng(uint64_t seed, std::string_view stream)
      : gen_(splitmix64(seed ^ splitmix64(hash_name(stream)))) {}
  explicit Rng(uint64_t raw_seed) : gen_(raw_seed) {}

  uint64_t next_u64() { return gen_(); }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // uniform integer in [lo, hi], inclusive
  int uniform_int(int lo, int hi) {
    if (lo > hi) throw std::invalid_argument("uniform_int: empty range");
    const uint64_t span = static_cast<uint64_t>(hi) - static_cast<uint64_t>(lo) + 1;
    const uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return lo + static_cast<int>(x % span);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // index drawn from an (unnormalized is fine) nonnegative weight vector
  int categorical(const std::vector<double>& w) {
    double total = 0.0;
    for (double x : w) total += x;
    if (total <= 0.0) throw std::invalid_argument("categorical: zero mass");
    double u = uniform() * total;
    for (size_t i = 0; i < w.size(); ++i) {
      u -= w[i];
      if (u < 0.0) return static_cast<int>(i);
    }
    return static_cast<int>(w.size()) - 1;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace dmd
