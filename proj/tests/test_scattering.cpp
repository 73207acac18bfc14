// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the scatterformer authors
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "sf/rng.hpp"
#include "sf/scattering.hpp"
#include "sf/textures.hpp"

using namespace sf;
using namespace sf::scattering;

namespace {

Tensor<double> random_texture(std::int64_t h, std::int64_t w, Rng& rng) {
  return textures::sample(h, w, rng);
}

}  // namespace

TEST_CASE("path enumeration respects the strictly increasing scale rule") {
  auto p1 = admissible_paths(3, 8, 1);
  CHECK(p1.size() == 24);
  auto p2 = admissible_paths(3, 8, 2);
  CHECK(p2.size() == 3 * 64);  // (1,2),(1,3),(2,3) x 8x8
  for (const auto& p : p2) CHECK(p[0].j < p[1].j);
  CHECK(admissible_paths(1, 4, 2).empty());
}

TEST_CASE("zero input scatters to zero with zero energies") {
  auto bank = wavelets::build_filter_bank<double>(2, 4, 32, 32);
  Tensor<double> x({32, 32});
  auto s = scattering_transform(x, bank, 2);
  CHECK(s.total_energy() == 0.0);
  for (double v : s.order0.data) CHECK(v == 0.0);
  for (const auto& [p, m] : s.order1)
    for (double v : m.data) CHECK(v == 0.0);
}

TEST_CASE("constant input: order-0 carries it, band passes kill it") {
  auto bank = wavelets::build_filter_bank<double>(2, 4, 32, 32);
  const double c = 3.7;
  Tensor<double> x({32, 32}, c);
  auto s = scattering_transform(x, bank, 2);
  // order-0 approximately c everywhere (phi has unit DC gain up to the
  // Littlewood-Paley normalization)
  for (double v : s.order0.data) CHECK(v == doctest::Approx(c).epsilon(0.02));
  const double in_e = s.input_energy;
  CHECK(s.energy_by_order[1] < 1e-6 * in_e);
  CHECK(s.energy_by_order[2] < 1e-6 * in_e);
}

TEST_CASE("shape mismatch with the bank is rejected") {
  auto bank = wavelets::build_filter_bank<double>(2, 4, 32, 32);
  Tensor<double> x({16, 16}, 1.0);
  CHECK_THROWS_AS((void)scattering_transform(x, bank, 2), std::invalid_argument);
  Tensor<double> y({32, 32});
  CHECK_THROWS_AS((void)scattering_transform(y, bank, 3), std::invalid_argument);
}

TEST_CASE("energy accounting: captured energy is large but never created") {
  auto bank = wavelets::build_filter_bank<double>(3, 8, 64, 64);
  Rng rng(2024);
  int e1_gt_e2 = 0;
  const int images = 12;
  Options full;
  full.subsample = false;  // energies of the undecimated maps
  for (int i = 0; i < images; ++i) {
    auto x = random_texture(64, 64, rng);
    auto s = scattering_transform(x, bank, 2, full);
    const double total = s.total_energy();
    CHECK(total >= 0.9 * s.input_energy);
    CHECK(total <= (1.0 + 1e-6) * s.input_energy);
    if (s.energy_by_order[1] > s.energy_by_order[2]) ++e1_gt_e2;
  }
  CHECK(e1_gt_e2 == images);
}

TEST_CASE("recorded energies equal the stored-map norms in every mode") {
  auto bank = wavelets::build_filter_bank<double>(2, 4, 32, 32);
  Rng rng(300);
  auto x = random_texture(32, 32, rng);
  for (bool sub : {true, false}) {
    Options o;
    o.subsample = sub;
    auto s = scattering_transform(x, bank, 2, o);
    double e1 = 0.0, e2 = 0.0;
    for (const auto& [p, m] : s.order1) e1 += grid_energy(m);
    for (const auto& [p, m] : s.order2) e2 += grid_energy(m);
    CHECK(e1 == doctest::Approx(s.energy_by_order[1]).epsilon(1e-6));
    CHECK(e2 == doctest::Approx(s.energy_by_order[2]).epsilon(1e-6));
    CHECK(grid_energy(s.order0) == doctest::Approx(s.energy_by_order[0]).epsilon(1e-6));
  }
}

TEST_CASE("all scattering coefficient maps are nonnegative") {
  auto bank = wavelets::build_filter_bank<double>(2, 4, 32, 32);
  Rng rng(55);
  auto x = random_texture(32, 32, rng);
  for (auto& v : x.data) v = std::fabs(v);  // nonnegative input
  auto s = scattering_transform(x, bank, 2);
  for (double v : s.order0.data) CHECK(v >= -1e-9);
  for (const auto& [p, m] : s.order1)
    for (double v : m.data) CHECK(v >= 0.0);
  for (const auto& [p, m] : s.order2)
    for (double v : m.data) CHECK(v >= 0.0);
}

TEST_CASE("contraction: identical inputs give (0, 0)") {
  auto bank = wavelets::build_filter_bank<double>(2, 4, 32, 32);
  Rng rng(7);
  auto x = random_texture(32, 32, rng);
  auto [lhs, rhs] = contraction_check(x, x, bank);
  CHECK(lhs == 0.0);
  CHECK(rhs == 0.0);
}

TEST_CASE("contraction holds for impulse perturbations and random pairs") {
  auto bank = wavelets::build_filter_bank<double>(2, 4, 32, 32);
  Rng rng(8);
  auto x = random_texture(32, 32, rng);
  auto y = x;
  y.at2(13, 20) += 1e-3;
  auto [lhs, rhs] = contraction_check(x, y, bank);
  CHECK(lhs <= rhs + 1e-12);

  for (int J : {1, 2, 3}) {
    auto b = wavelets::build_filter_bank<double>(J, 4, 32, 32);
    for (int t = 0; t < 12; ++t) {
      auto u = random_texture(32, 32, rng);
      auto v = random_texture(32, 32, rng);
      auto [l, r] = contraction_check(u, v, b);
      CHECK(l <= r + 1e-6);
    }
  }
}

TEST_CASE("translation sensitivity: zero shift and full-period shift vanish") {
  auto bank = wavelets::build_filter_bank<double>(2, 4, 32, 32);
  Rng rng(9);
  auto x = random_texture(32, 32, rng);
  CHECK(translation_sensitivity(x, 0, 0, bank) == 0.0);
  // A full-period shift is the identity on the circular domain.
  CHECK(translation_sensitivity(x, 0, 32, bank) < 1e-6);
  CHECK_THROWS_AS((void)translation_sensitivity(x, 0, 9, bank), std::invalid_argument);
  CHECK_THROWS_AS((void)translation_sensitivity(Tensor<double>({32, 32}), 1, 0, bank),
                  std::invalid_argument);
}

TEST_CASE("translation sensitivity decreases with J") {
  Rng rng(10);
  auto x = random_texture(64, 64, rng);
  double prev = 1e300;
  for (int J : {1, 2, 3}) {
    auto bank = wavelets::build_filter_bank<double>(J, 4, 64, 64);
    double dev = translation_sensitivity(x, 2, 0, bank);
    CHECK(dev < prev);
    prev = dev;
  }
}

TEST_CASE("subsampled maps keep the energy bookkeeping of their stored grids") {
  auto bank = wavelets::build_filter_bank<double>(2, 4, 32, 32);
  Rng rng(12);
  auto x = random_texture(32, 32, rng);
  auto s = scattering_transform(x, bank, 2);
  CHECK(s.subsample_log2 == 2);
  CHECK(s.order0.shape == std::vector<std::int64_t>{8, 8});
  for (const auto& [p, m] : s.order1)
    CHECK(m.shape == std::vector<std::int64_t>{8, 8});

  Options full;
  full.subsample = false;
  auto sf_ = scattering_transform(x, bank, 2, full);
  CHECK(sf_.order0.shape == std::vector<std::int64_t>{32, 32});
  // Subsampled energies track the full-resolution ones (Riemann sums).
  CHECK(s.total_energy() ==
        doctest::Approx(sf_.total_energy()).epsilon(0.05));
}
