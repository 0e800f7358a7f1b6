#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace panelfe {

// SplitMix64 finalizer, used both for key mixing and for seeding streams.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Folds an arbitrary tuple of integers into one stream key. Streams keyed by
// distinct tuples are independent for all practical purposes.
inline std::uint64_t mix_keys(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t k = 0x8f1bbcdc2f4a11e3ULL;
  for (auto p : parts) k = splitmix64(k ^ splitmix64(p));
  return k;
}

// xoshiro256++ with hand-rolled transforms for every distribution we need,
// so that a (key) pair reproduces the identical draw sequence on any
// platform and under any parallel schedule.
class Rng {
 public:
  explicit Rng(std::uint64_t key) {
    std::uint64_t s = key;
    for (auto& word : state_) {
      s = splitmix64(s);
      word = s;
    }
    has_cached_normal_ = false;
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform on [0,1), 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0,1); never returns an exact 0 (safe for logs).
  double uniform01_open() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  // Box-Muller; the second variate of a pair is cached.
  double normal() {
    if (has_cached_normal_) {
      has_cached_normal_ = false;
      return cached_normal_;
    }
    const double u1 = uniform01_open();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    cached_normal_ = r * std::sin(theta);
    has_cached_normal_ = true;
    return r * std::cos(theta);
  }

  // Student t with integer df, as a normal over the root of an independent
  // chi-square(df)/df (the chi-square built from df squared normals).
  double student_t(int df) {
    const double z = normal();
    double chi2 = 0.0;
    for (int j = 0; j < df; ++j) {
      const double g = normal();
      chi2 += g * g;
    }
    return z / std::sqrt(chi2 / static_cast<double>(df));
  }

  double exponential() { return -std::log(uniform01_open()); }

  // Marsaglia-Tsang; shape < 1 handled by the usual boost gamma(a+1)*U^{1/a}.
  double gamma(double shape) {
    if (shape < 1.0) {
      const double u = uniform01_open();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform01_open();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

 private:
  static std::uint64_t rotl(std::uint64_t v, int k) {
    return (v << k) | (v >> (64 - k));
  }

  std::uint64_t state_[4];
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace panelfe
