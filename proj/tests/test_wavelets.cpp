// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the scatterformer authors
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <numbers>

#include "doctest.h"
#include "sf/fft.hpp"
#include "sf/rng.hpp"
#include "sf/wavelets.hpp"

using namespace sf;
using namespace sf::wavelets;

TEST_CASE("bank cardinality: exactly J*L band-pass filters plus one low-pass") {
  auto bank = build_filter_bank<double>(1, 1, 32, 32);
  CHECK(bank.n_bandpass() == 1);
  CHECK(bank.psi_at[0].size() == 1);
  CHECK(bank.phi_at.size() == 2u);  // resolutions 0..J

  auto b2 = build_filter_bank<double>(3, 8, 64, 64);
  CHECK(b2.psi_at[0].size() == 24);
}

TEST_CASE("every band-pass filter has numerically zero mean") {
  for (auto [J, L] : {std::pair<int, int>{1, 4}, {2, 4}, {3, 8}}) {
    auto bank = build_filter_bank<double>(J, L, 64, 64);
    double peak = 0.0;
    for (int j = 1; j <= J; ++j)
      for (int l = 0; l < L; ++l)
        for (double v : bank.psi(j, l).data) peak = std::max(peak, std::fabs(v));
    for (int j = 1; j <= J; ++j)
      for (int l = 0; l < L; ++l)
        CHECK(std::fabs(bank.psi(j, l).at2(0, 0)) < 1e-6 * peak);
  }
}

TEST_CASE("Littlewood-Paley sum lies in the calibrated [0.5, 1.01] band") {
  for (int J : {1, 2, 3}) {
    for (int L : {4, 8}) {
      auto bank = build_filter_bank<double>(J, L, 64, 64);
      CHECK(bank.lp_min >= 0.5);
      CHECK(bank.lp_max <= 1.01);
      // direct frequency-grid scan, independent of the stored bounds
      auto lp = littlewood_paley(bank);
      for (std::int64_t u = 0; u < 64; ++u)
        for (std::int64_t v = 0; v < 64; ++v) {
          if (u == 0 && v == 0) continue;
          CHECK(lp.at2(u, v) >= 0.5);
          CHECK(lp.at2(u, v) <= 1.01);
        }
    }
  }
}

TEST_CASE("filter norms are rotation-invariant at fixed scale") {
  auto bank = build_filter_bank<double>(3, 8, 64, 64);
  for (int j = 1; j <= 3; ++j) {
    double mn = 1e300, mx = 0.0;
    for (int l = 0; l < 8; ++l) {
      double e = 0.0;
      for (double v : bank.psi(j, l).data) e += v * v;
      mn = std::min(mn, e);
      mx = std::max(mx, e);
    }
    CHECK((mx - mn) / mx < 1e-3);
  }
}

TEST_CASE("bank construction rejects bad parameters") {
  CHECK_THROWS_AS((void)build_filter_bank<double>(0, 4, 32, 32), std::invalid_argument);
  CHECK_THROWS_AS((void)build_filter_bank<double>(1, 4, 33, 32), std::invalid_argument);
  CHECK_THROWS_AS((void)build_filter_bank<double>(4, 4, 16, 16), std::invalid_argument);
}

TEST_CASE("bank serialization round trip preserves filters") {
  namespace fs = std::filesystem;
  auto dir = (fs::temp_directory_path() / "sf_bank").string();
  auto bank = build_filter_bank<double>(2, 4, 32, 32);
  save_filter_bank(bank, dir);
  auto loaded = load_filter_bank<double>(dir);
  CHECK(loaded.J == bank.J);
  CHECK(loaded.L == bank.L);
  CHECK(loaded.params.c2 == doctest::Approx(bank.params.c2));
  for (int j = 1; j <= 2; ++j)
    for (int l = 0; l < 4; ++l)
      for (std::int64_t i = 0; i < bank.psi(j, l).numel(); ++i)
        CHECK(loaded.psi(j, l).data[i] == doctest::Approx(bank.psi(j, l).data[i]));
  fs::remove_all(dir);
}

TEST_CASE("morlet_lipschitz_constant matches direct arithmetic") {
  MorletParams p;
  p.c1 = 0.1;
  p.xi = 2.0;
  p.c2 = 0.5;
  p.sigma = 1.0;
  CHECK(morlet_lipschitz_constant(p) == doctest::Approx(0.5));
  CHECK(morlet_is_contractive(p));

  p.c1 = 1.0;
  p.c2 = 1.0;
  CHECK(morlet_lipschitz_constant(p) == doctest::Approx(6.0));
  CHECK(!morlet_is_contractive(p));
}

TEST_CASE("empirical Lipschitz ratio never exceeds the analytic constant") {
  MorletParams p;
  p.c1 = 0.1;
  p.xi = 2.0;
  p.c2 = 0.5;
  p.sigma = 1.0;
  const double k = morlet_lipschitz_constant(p);
  Rng rng(77);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    double u = rng.uniform(-3.0, 3.0);
    double v = rng.uniform(-3.0, 3.0);
    if (std::fabs(u - v) < 1e-6) continue;
    double ratio = std::fabs(morlet_map(u, p) - morlet_map(v, p)) / std::fabs(u - v);
    worst = std::max(worst, ratio);
  }
  CHECK(worst <= k);
}

// ---- 1-D CWT -------------------------------------------------------------

TEST_CASE("cwt of the zero signal is zero") {
  std::vector<double> x(256, 0.0);
  auto scales = cwt_scale_grid(Mother::Morlet, 250.0, 16, 0.5, 70.0);
  auto res = cwt_1d(x, Mother::Morlet, scales);
  for (double v : res.coeffs.re) CHECK(v == 0.0);
  for (double v : res.coeffs.im) CHECK(v == 0.0);
}

TEST_CASE("constant signal is annihilated by every mother wavelet") {
  std::vector<double> x(512, 5.0);
  double sig_norm = std::sqrt(512.0) * 5.0;
  for (Mother m : {Mother::Morlet, Mother::Paul, Mother::Dog}) {
    auto scales = cwt_scale_grid(m, 250.0, 8, 1.0, 60.0);
    auto res = cwt_1d(x, m, scales);
    double worst = 0.0;
    for (std::size_t i = 0; i < res.coeffs.re.size(); ++i)
      worst = std::max(worst, std::hypot(res.coeffs.re[i], res.coeffs.im[i]));
    CHECK(worst < 1e-4 * sig_norm);
  }
}

TEST_CASE("Morlet peak row matches the analytic center-frequency relation") {
  const double fs = 250.0, f0 = 10.0;
  const int n = 1000;
  std::vector<double> x(n);
  for (int t = 0; t < n; ++t)
    x[static_cast<std::size_t>(t)] = std::sin(2.0 * std::numbers::pi * f0 * t / fs);

  auto scales = cwt_scale_grid(Mother::Morlet, fs, 32, 0.5, 70.0);
  auto res = cwt_1d(x, Mother::Morlet, scales);
  int best = -1;
  double best_p = -1.0;
  for (int s = 0; s < 32; ++s) {
    double p = 0.0;
    for (int t = 0; t < n; ++t) {
      auto idx = static_cast<std::size_t>(s * n + t);
      p += res.coeffs.re[idx] * res.coeffs.re[idx] + res.coeffs.im[idx] * res.coeffs.im[idx];
    }
    if (p > best_p) {
      best_p = p;
      best = s;
    }
  }
  // a = (w0 + sqrt(2 + w0^2)) / (4 pi f), in samples
  const double w0 = 6.0;
  const double a_expect = (w0 + std::sqrt(2.0 + w0 * w0)) / (4.0 * std::numbers::pi * (f0 / fs));
  int nearest = 0;
  double bestd = 1e300;
  for (int s = 0; s < 32; ++s) {
    double d = std::fabs(std::log(scales[static_cast<std::size_t>(s)] / a_expect));
    if (d < bestd) {
      bestd = d;
      nearest = s;
    }
  }
  CHECK(std::abs(best - nearest) <= 1);
}

TEST_CASE("cwt is equivariant to integer circular time shifts") {
  Rng rng(5);
  for (int n : {256, 250}) {  // power of two and native odd length
    std::vector<double> x(static_cast<std::size_t>(n));
    for (auto& v : x) v = rng.normal();
    const int shift = 17;
    std::vector<double> xs(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t)
      xs[static_cast<std::size_t>((t + shift) % n)] = x[static_cast<std::size_t>(t)];

    auto scales = cwt_scale_grid(Mother::Morlet, 250.0, 8, 2.0, 50.0);
    auto a = cwt_1d(x, Mother::Morlet, scales);
    auto b = cwt_1d(xs, Mother::Morlet, scales);
    double worst = 0.0;
    for (int s = 0; s < 8; ++s)
      for (int t = 0; t < n; ++t) {
        auto i0 = static_cast<std::size_t>(s * n + t);
        auto i1 = static_cast<std::size_t>(s * n + (t + shift) % n);
        worst = std::max(worst, std::fabs(a.coeffs.re[i0] - b.coeffs.re[i1]) +
                                    std::fabs(a.coeffs.im[i0] - b.coeffs.im[i1]));
      }
    CHECK(worst < 1e-9);
  }
}

TEST_CASE("rows with scale beyond the signal duration are flagged invalid") {
  std::vector<double> x(64, 1.0);
  auto res = cwt_1d(x, Mother::Morlet, {4.0, 32.0, 100.0});
  CHECK(res.valid[0] == 1);
  CHECK(res.valid[1] == 1);
  CHECK(res.valid[2] == 0);
  CHECK_THROWS_AS((void)cwt_1d(std::vector<double>(8, 0.0), Mother::Morlet, {4.0}),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)cwt_1d(x, Mother::Morlet, {-1.0}), std::invalid_argument);
}
