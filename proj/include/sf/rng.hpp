// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the scatterformer authors
#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <vector>

namespace sf {

// Counter-based generator. Each draw hashes (key, counter) with the
// splitmix64 finalizer, so streams can be derived per (seed, fold, epoch,
// batch, ...) and results are independent of thread scheduling.
class Rng {
 public:
  explicit Rng(std::uint64_t key) : key_(key) {}

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Derives a child key by absorbing stream identifiers one at a time.
  static Rng derive(std::uint64_t seed, std::initializer_list<std::uint64_t> ids) {
    std::uint64_t k = mix(seed);
    for (std::uint64_t id : ids) k = mix(k ^ mix(id ^ 0x517cc1b727220a95ULL));
    return Rng(k);
  }

  std::uint64_t next_u64() { return mix(key_ ^ (ctr_++ * 0xd1342543de82ef95ULL)); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n) {
    // Rejection-free modulo is fine here: n is tiny relative to 2^64.
    return next_u64() % n;
  }

  double normal() {
    double u1 = uniform(), u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double truncated_normal(double sigma, double clip = 2.0) {
    for (;;) {
      double z = normal();
      if (std::fabs(z) <= clip) return z * sigma;
    }
  }

  // Johnk's algorithm; valid for any a > 0 and exact for the small alphas
  // used by mixup.
  double beta(double a, double b) {
    for (;;) {
      double u = std::pow(uniform(), 1.0 / a);
      double v = std::pow(uniform(), 1.0 / b);
      if (u + v > 0.0 && u + v <= 1.0) return u / (u + v);
    }
  }

  std::vector<std::size_t> permutation(std::size_t n) {
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = i;
    for (std::size_t i = n; i > 1; --i) {
      std::size_t j = uniform_int(i);
      std::swap(p[i - 1], p[j]);
    }
    return p;
  }

 private:
  std::uint64_t key_;
  std::uint64_t ctr_ = 0;
};

}  // namespace sf
