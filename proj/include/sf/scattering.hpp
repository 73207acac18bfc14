// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the scatterformer authors
#pragma once

#include <array>
#include <utility>
#include <vector>

#include "sf/tensor.hpp"
#include "sf/wavelets.hpp"

namespace sf::scattering {

struct PathElem {
  int j;
  int l;
};
using Path = std::vector<PathElem>;

struct Options {
  // Store coefficient maps subsampled by 2^J (the public contract). The
  // full-resolution mode backs the contraction/translation analyses where
  // the mathematical guarantees must hold bin for bin.
  bool subsample = true;
  // Internal U[lambda_j] maps are kept at resolution 2^max(j-oversampling,0).
  // 1 keeps one octave of headroom against aliasing; 0 is fastest.
  int oversampling = 1;
};

template <typename T>
struct ScatteringCoeffs {
  Tensor<T> order0;
  std::vector<std::pair<Path, Tensor<T>>> order1;
  std::vector<std::pair<Path, Tensor<T>>> order2;
  int subsample_log2 = 0;
  double input_energy = 0.0;
  // Grid-consistent (mean-square) energies of the stored maps per order.
  std::array<double, 3> energy_by_order{0.0, 0.0, 0.0};

  double total_energy() const {
    return energy_by_order[0] + energy_by_order[1] + energy_by_order[2];
  }
};

// Mean-square "energy" of a map: (1/HW) sum x^2. Riemann-consistent across
// resolutions, so subsampled maps of smooth fields keep their energy.
template <typename T>
double grid_energy(const Tensor<T>& m);

// Second-order paths enforce strictly increasing scales (j1 < j2).
std::vector<Path> admissible_paths(int J, int L, int order);

template <typename T>
ScatteringCoeffs<T> scattering_transform(const Tensor<T>& x,
                                         const wavelets::FilterBank<T>& bank,
                                         int max_order, const Options& opts = {});

// Returns (||S x - S y||, ||x - y||) over the concatenated order-0..max_order
// coefficients at full resolution. The left side never exceeds the right:
// the bank is normalized so the wavelet transform is non-expansive.
template <typename T>
std::pair<double, double> contraction_check(const Tensor<T>& x, const Tensor<T>& y,
                                            const wavelets::FilterBank<T>& bank,
                                            int max_order = 2);

// ||S(shift(x)) - S(x)|| / ||S(x)|| for a circular pixel shift.
template <typename T>
double translation_sensitivity(const Tensor<T>& x, int dy, int dx,
                               const wavelets::FilterBank<T>& bank, int max_order = 2);

}  // namespace sf::scattering
