// Seeded random source with hand-rolled distributions.
//
// std::mt19937_64 output is pinned by the standard, but the standard library
// distributions are not, so everything derived from the raw 64-bit stream is
// implemented here. Identical seeds give identical streams on any platform.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace snnkit {

class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // uniform in [0, 1), 53-bit resolution
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  float uniformf() { return static_cast<float>(uniform()); }

  float uniformf(float lo, float hi) { return static_cast<float>(uniform(lo, hi)); }

  // inclusive bounds
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(gen_() % span);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller; caches the second draw so consumption order stays fixed.
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    const double two_pi = 6.283185307179586476925286766559;
    cached_ = mag * std::sin(two_pi * u2);
    has_cached_ = true;
    return mag * std::cos(two_pi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  float normalf(float mean, float stddev) { return static_cast<float>(normal(mean, stddev)); }

  // Derive an independent stream, e.g. one per worker or per dataset split.
  Rng split(std::uint64_t stream) {
    const std::uint64_t mix = next_u64();
    return Rng(mix ^ (stream * 0x9e3779b97f4a7c15ull + 0xd1b54a32d192ed03ull));
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace snnkit
