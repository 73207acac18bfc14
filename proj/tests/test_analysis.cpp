// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the scatterformer authors
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "sf/analysis.hpp"
#include "sf/rng.hpp"
#include "sf/scattering.hpp"
#include "sf/textures.hpp"

using namespace sf;
using namespace sf::analysis;

TEST_CASE("radial spectrum: constant map, checkerboard, white noise") {
  Tensor<double> constant({1, 16, 16}, 3.0);
  auto p = radial_spectrum(constant);
  CHECK(p.hf_ratio == 0.0);
  // all energy in the DC bin
  double e0 = std::exp(p.magnitude[0]);
  CHECK(e0 > 0);
  CHECK(p.total_energy == doctest::Approx(16.0 * 16.0 * 9.0).epsilon(1e-6));

  Tensor<double> checker({1, 16, 16});
  for (std::int64_t r = 0; r < 16; ++r)
    for (std::int64_t c = 0; c < 16; ++c)
      checker.data[static_cast<std::size_t>(r * 16 + c)] = ((r + c) % 2) ? 1.0 : -1.0;
  auto pc = radial_spectrum(checker);
  CHECK(pc.hf_ratio > 0.9);

  // white noise: hf_ratio close to the area fraction outside radius 0.25
  Rng rng(31);
  double mean_hf = 0;
  const int seeds = 100;
  for (int s = 0; s < seeds; ++s) {
    Tensor<double> noise({1, 64, 64});
    for (auto& v : noise.data) v = rng.normal();
    mean_hf += radial_spectrum(noise).hf_ratio;
  }
  mean_hf /= seeds;
  const double area_fraction = 1.0 - M_PI * 0.25 * 0.25;  // of the [-1/2,1/2)^2 square
  CHECK(mean_hf == doctest::Approx(area_fraction).epsilon(0.10));
}

TEST_CASE("radial spectrum energy equals the feature-map energy (Parseval)") {
  Rng rng(33);
  Tensor<double> fmap({3, 32, 32});
  for (auto& v : fmap.data) v = rng.normal();
  auto p = radial_spectrum(fmap);
  double e = 0;
  for (double v : fmap.data) e += v * v;
  e /= 3.0;  // channel average
  CHECK(p.total_energy == doctest::Approx(e).epsilon(1e-4));

  Tensor<double> small({1, 4, 4});
  CHECK_THROWS_AS((void)radial_spectrum(small), std::invalid_argument);
}

TEST_CASE("theorem1: zero differences, direct formula, brute-force oracle") {
  // constant features: zero bound term
  BoundInputs in;
  in.features = Tensor<double>({2, 3, 3, 2}, 1.5);
  in.shifts = {{0, 1}, {1, 0}};
  in.d = 10;
  CHECK(theorem1_bound_term(in) == 0.0);

  // N=1, d=e (ln d = 1), B=1, single shift, ||x(j)-x(j')|| = 2
  BoundInputs one;
  one.features = Tensor<double>({1, 1, 2, 1});
  one.features.data = {0.0, 2.0};
  one.shifts = {{0, 1}};
  one.d = std::exp(1.0);
  CHECK(theorem1_bound_term(one) == doctest::Approx(2.0).epsilon(1e-12));

  // random features against an exhaustive double-loop oracle
  Rng rng(41);
  BoundInputs rnd;
  rnd.features = Tensor<double>({3, 4, 5, 2});
  for (auto& v : rnd.features.data) v = rng.normal();
  rnd.shifts = {{0, 1}, {1, 0}};
  rnd.B = 1.7;
  rnd.d = 9.0;
  double best = 0;
  for (auto [dy, dx] : {std::pair<int, int>{0, 1}, {1, 0}}) {
    for (std::int64_t y = 0; y + dy < 4; ++y)
      for (std::int64_t x = 0; x + dx < 5; ++x) {
        double acc = 0;
        for (std::int64_t n = 0; n < 3; ++n)
          for (std::int64_t k = 0; k < 2; ++k) {
            auto at = [&](std::int64_t yy, std::int64_t xx) {
              return rnd.features.data[static_cast<std::size_t>(((n * 4 + yy) * 5 + xx) * 2 + k)];
            };
            const double diff = at(y, x) - at(y + dy, x + dx);
            acc += diff * diff;
          }
        best = std::max(best, acc);
      }
  }
  const double expect = 1.7 * std::sqrt(std::log(9.0)) / 3.0 * std::sqrt(best);
  CHECK(theorem1_bound_term(rnd) == doctest::Approx(expect).epsilon(1e-9));

  BoundInputs empty = rnd;
  empty.shifts.clear();
  CHECK_THROWS_AS((void)theorem1_bound_term(empty), std::invalid_argument);
}

TEST_CASE("theorem1 bound term is homogeneous in the feature scale") {
  Rng rng(43);
  BoundInputs in;
  in.features = Tensor<double>({2, 4, 4, 3});
  for (auto& v : in.features.data) v = rng.normal();
  in.shifts = {{1, 0}};
  in.d = 7.0;
  const double base = theorem1_bound_term(in);
  for (double s : {0.5, 2.0}) {
    BoundInputs scaled = in;
    for (auto& v : scaled.features.data) v *= s;
    CHECK(theorem1_bound_term(scaled) == doctest::Approx(s * base).epsilon(1e-9));
  }
}

TEST_CASE("theorem2: contractive params shrink the bound, ratios stay below") {
  wavelets::MorletParams p;
  p.c1 = 0.1;
  p.xi = 2.0;
  p.c2 = 0.5;
  p.sigma = 1.0;
  auto rep = theorem2_verify(p, 1000);
  CHECK(rep.constant == doctest::Approx(0.5));
  CHECK(rep.contractive);
  CHECK(rep.max_empirical_ratio <= rep.constant);
  CHECK(rep.bound_decreased == rep.datasets);
  CHECK(rep.holds);

  wavelets::MorletParams loose;
  loose.c1 = 1.0;
  loose.xi = 2.0;
  loose.c2 = 1.0;
  loose.sigma = 1.0;
  auto rep2 = theorem2_verify(loose, 500);
  CHECK(!rep2.contractive);  // constant >= 1: no claim made
  CHECK(rep2.max_empirical_ratio <= rep2.constant);

  CHECK_THROWS_AS((void)theorem2_verify(p, 10), std::invalid_argument);
}

TEST_CASE("theorem3: frozen extremal case and Monte-Carlo verification") {
  // m=1, a=1, b such that b.(x - y) = 0.5: distance^2 = 2 - 2cos(pi) = 4 = bound
  FourierFeatureParams params;
  params.amplitudes = {1.0};
  params.frequencies = {{0.5 / 2.0, 0.0}};  // b.(x-y) = 0.25 * 2 = 0.5
  Tensor<double> pair({1, 2, 2});
  pair.data = {1.0, 0.0, -1.0, 0.0};  // unit vectors, difference (2, 0)
  auto rep = theorem3_verify(params, pair);
  CHECK(rep.lhs == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(rep.bound == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(rep.holds);

  // identical pairs: zero distance
  Tensor<double> same({1, 2, 2});
  same.data = {0.6, 0.8, 0.6, 0.8};
  CHECK(theorem3_verify(params, same).lhs == doctest::Approx(0.0));

  // 1000 random instances: the inequality is a theorem
  Rng rng(47);
  int ok = 0;
  const int trials = 1000;
  for (int t = 0; t < trials; ++t) {
    const auto N = static_cast<std::int64_t>(1 + rng.uniform_int(20));
    const auto m = static_cast<std::size_t>(1 + rng.uniform_int(8));
    const std::int64_t d = 2 + static_cast<std::int64_t>(rng.uniform_int(4));
    FourierFeatureParams fp;
    for (std::size_t k = 0; k < m; ++k) {
      fp.amplitudes.push_back(rng.uniform(-1.5, 1.5));
      std::vector<double> b;
      for (std::int64_t c = 0; c < d; ++c) b.push_back(rng.normal());
      fp.frequencies.push_back(std::move(b));
    }
    Tensor<double> feats({N, 2, d});
    for (std::int64_t i = 0; i < N * 2; ++i) {
      double norm = 0;
      std::vector<double> v(static_cast<std::size_t>(d));
      for (auto& x : v) {
        x = rng.normal();
        norm += x * x;
      }
      norm = std::sqrt(norm);
      for (std::int64_t c = 0; c < d; ++c)
        feats.data[static_cast<std::size_t>(i * d + c)] = v[static_cast<std::size_t>(c)] / norm;
    }
    if (theorem3_verify(fp, feats).holds) ++ok;
  }
  CHECK(ok == trials);

  Tensor<double> unnorm({1, 2, 2});
  unnorm.data = {2.0, 0.0, 1.0, 0.0};
  CHECK_THROWS_AS((void)theorem3_verify(params, unnorm), std::invalid_argument);
}

TEST_CASE("feature correlation: identity shift gives variance, noise decays") {
  Rng rng(51);
  Tensor<double> f({200, 4, 4, 2});
  for (auto& v : f.data) v = rng.normal();
  // zero shift: covariance equals the (averaged) variance
  const double var = feature_correlation(f, 0, 0);
  CHECK(var == doctest::Approx(1.0).epsilon(0.15));
  // independent fields: |cov| below the Monte-Carlo tolerance
  const double cov = feature_correlation(f, 0, 1);
  CHECK(std::fabs(cov) < 3.0 / std::sqrt(200.0));

  CHECK_THROWS_AS((void)feature_correlation(Tensor<double>({1, 2, 2, 1}), 0, 1),
                  std::invalid_argument);
}

TEST_CASE("scattering features correlate more with their neighbors than pixels") {
  // paired comparison on the texture suite: standardized neighbor covariance
  Rng rng(53);
  auto bank = wavelets::build_filter_bank<double>(1, 4, 32, 32);
  const std::int64_t N = 12;
  // both fields live on the same stride-2 grid of the 32x32 textures
  Tensor<double> raw({N, 16, 16, 1});
  Tensor<double> scat({N, 16, 16, 1});
  for (std::int64_t n = 0; n < N; ++n) {
    // oscillation-rich textures: the modulus demodulates the carriers into
    // smooth envelopes, which is where the correlation gain comes from
    auto x = textures::sample(32, 32, rng, /*spectral_exponent=*/0.8,
                              /*max_grating_freq=*/2.6);
    for (std::int64_t r = 0; r < 16; ++r)
      for (std::int64_t c = 0; c < 16; ++c)
        raw.data[static_cast<std::size_t>(((n * 16 + r) * 16 + c))] = x.at2(2 * r, 2 * c);
    auto s = scattering::scattering_transform(x, bank, 1);
    // first-order mean map as the feature field
    Tensor<double> acc({16, 16});
    for (const auto& [path, m2] : s.order1)
      for (std::int64_t i = 0; i < 256; ++i)
        acc.data[static_cast<std::size_t>(i)] += m2.data[static_cast<std::size_t>(i)];
    for (std::int64_t i = 0; i < 256; ++i)
      scat.data[static_cast<std::size_t>(n * 256 + i)] = acc.data[static_cast<std::size_t>(i)];
  }
  auto standardize = [](Tensor<double>& t) {
    double mu = 0, sd = 0;
    for (double v : t.data) mu += v;
    mu /= static_cast<double>(t.numel());
    for (double v : t.data) sd += (v - mu) * (v - mu);
    sd = std::sqrt(sd / static_cast<double>(t.numel()));
    for (auto& v : t.data) v = (v - mu) / sd;
  };
  standardize(raw);
  standardize(scat);
  // correlation coefficient: neighbor covariance over the variance
  const double raw_corr = feature_correlation(raw, 0, 1) / feature_correlation(raw, 0, 0);
  const double scat_corr = feature_correlation(scat, 0, 1) / feature_correlation(scat, 0, 0);
  CHECK(scat_corr > raw_corr);
}
