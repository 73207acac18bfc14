// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the scatterformer authors
#pragma once

#include <array>
#include <string>
#include <vector>

#include "sf/model.hpp"
#include "sf/tensor.hpp"
#include "sf/wavelets.hpp"

namespace sf::analysis {

struct SpectrumProfile {
  std::vector<double> radial_freq;  // bin centers, normalized to [0, 0.5]
  std::vector<double> magnitude;    // averaged log magnitude per bin
  double hf_ratio = 0.0;            // linear-energy fraction above the cutoff
  double total_energy = 0.0;        // pre-log spectral energy (Parseval check)
};

// Channel-averaged radial power profile of a (C, H, W) feature map with
// floor(min(H,W)/2) bins; corner bins beyond 0.5 fold into the last bin so
// the binning is energy complete. Requires H, W >= 8.
SpectrumProfile radial_spectrum(const Tensor<double>& feature_map, double hf_cutoff = 0.25);
SpectrumProfile radial_spectrum(const Tensor<float>& feature_map, double hf_cutoff = 0.25);

struct BranchSpectra {
  SpectrumProfile high;  // Upsample(X_h') activations
  SpectrumProfile low;   // X_l' activations
  SpectrumProfile fused;
  double hf_ratio_diff = 0.0;  // high - low
};

// Captures the dual-branch activations of the last FAA block of the given
// stage (1-based) in eval mode. Small stage grids skip the >= 8 floor: the
// radial estimate is coarse there but the hf split stays well defined.
template <typename T>
BranchSpectra branch_spectrum_report(model::Model<T>& m, const Tensor<T>& batch, int stage,
                                     double hf_cutoff = 0.25);

// ---- generalization-bound tooling ---------------------------------------

struct BoundInputs {
  // x_i(j): N samples of D-vector features on an (Sy, Sx) site grid.
  Tensor<double> features;  // shape (N, Sy, Sx, D)
  std::vector<std::array<int, 2>> shifts;  // index offsets forming the filter shape
  double B = 1.0;  // 1-norm weight budget
  double d = 2.0;  // input dimension (enters through sqrt(ln d))
  double c = 1.0;  // absolute constant, kept at 1 for relative comparisons
};

// (c B sqrt(ln d) / N) * max over site pairs with offset in the shift set of
// sqrt(sum_i ||x_i(j) - x_i(j')||^2).
double theorem1_bound_term(const BoundInputs& inputs);

struct Theorem2Report {
  double constant = 0.0;
  bool contractive = false;
  double max_empirical_ratio = 0.0;
  int ratio_pairs = 0;
  int datasets = 0;
  int bound_decreased = 0;  // datasets where the term shrank after the map
  bool holds = false;
};

// Checks the pointwise Morlet map: the empirical difference ratio never
// exceeds the analytic constant, and for contractive parameters the
// theorem-1 data term shrinks on every sampled dataset.
Theorem2Report theorem2_verify(const wavelets::MorletParams& params, int trials,
                               std::uint64_t seed = 11);

struct FourierFeatureParams {
  std::vector<double> amplitudes;      // a_1..a_m
  std::vector<std::vector<double>> frequencies;  // b_k, each of dimension d
};

struct Theorem3Report {
  double lhs = 0.0;    // sum_i ||gamma(x_i(j)) - gamma(x_i(j'))||^2
  double bound = 0.0;  // 4 N sum a_k^2
  bool holds = false;
  // the amplitude-selection condition 4N sum a_k^2 < sum ||x(j) - x(j')||^2
  bool amplitude_condition = false;
};

// Feature pairs: (N, 2, d) tensor of unit-norm vectors; the squared gamma
// distances are evaluated exactly through the cosine inner-product identity.
Theorem3Report theorem3_verify(const FourierFeatureParams& params,
                               const Tensor<double>& feature_pairs);

// Sample covariance of x_i(j) and x_i(j + shift) across samples, averaged
// over components and valid sites. features shaped (N, Sy, Sx, D).
double feature_correlation(const Tensor<double>& features, int dy, int dx);

}  // namespace sf::analysis
