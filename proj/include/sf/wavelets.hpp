// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the scatterformer authors
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sf/tensor.hpp"

namespace sf::wavelets {

// Parameters of the Morlet family psi(x) = C1 (e^{i x xi} - C2) e^{-x^2/(2 sigma^2)}.
// C2 is the admissibility correction that cancels the mean; the bank builder
// computes it numerically on the discrete grid.
struct MorletParams {
  double c1 = 1.0;
  double c2 = 0.0;
  // Center frequency / envelope width calibrated so the Littlewood-Paley
  // sum of every bank shape used here stays inside [0.5, 1.01].
  double xi = 2.8;
  double sigma = 0.55;
};

// Analytic Lipschitz bound |C1| (|xi| + (|C2|+1) * 2 / sigma^2). Values below
// one mean the pointwise Morlet map is a contraction.
double morlet_lipschitz_constant(const MorletParams& p);
bool morlet_is_contractive(const MorletParams& p);

// Pointwise Morlet modulus map, applied elementwise in the theory checks.
double morlet_map(double x, const MorletParams& p);

inline constexpr double kDefaultPhiSigmaFactor = 0.24;

// Dyadic directional filter bank sampled in the frequency domain on an
// (h, w) grid, h and w powers of two. Band-pass j in [1, J] is the mother
// dilated by 2^(j-1); theta_l = pi*l/L spans the half circle. The low-pass
// is a Gaussian at scale 2^J. All responses are real.
//
// After construction the whole bank is rescaled so the Littlewood-Paley
// function never exceeds one; this makes the scattering transform exactly
// non-expansive on the grid. lp_min/lp_max record the calibrated range over
// nonzero frequencies.
template <typename T>
struct FilterBank {
  int J = 0;
  int L = 0;
  std::int64_t h = 0, w = 0;
  MorletParams params;
  double slant = 0.5;
  double lp_min = 0.0, lp_max = 0.0;

  // psi_at[r][(j-1)*L + l] and phi_at[r]: filters periodized to resolution
  // r (grid h/2^r x w/2^r), r = 0..J. Index r=0 is the native grid.
  std::vector<std::vector<Tensor<T>>> psi_at;
  std::vector<Tensor<T>> phi_at;

  int n_bandpass() const { return J * L; }
  const Tensor<T>& psi(int j, int l, int res = 0) const {
    return psi_at.at(res).at(static_cast<std::size_t>((j - 1) * L + l));
  }
  const Tensor<T>& phi(int res = 0) const { return phi_at.at(static_cast<std::size_t>(res)); }
};

// phi_sigma_factor scales the low-pass width relative to 2^J; the default
// is the calibrated value for the standard configurations.
template <typename T>
FilterBank<T> build_filter_bank(int J, int L, std::int64_t h, std::int64_t w,
                                const MorletParams& params = MorletParams{},
                                double phi_sigma_factor = kDefaultPhiSigmaFactor);

// Littlewood-Paley function |phi(w)|^2 + 1/2 sum_j,l (|psi(w)|^2 + |psi(-w)|^2)
// on the full frequency grid.
template <typename T>
Tensor<double> littlewood_paley(const FilterBank<T>& bank);

template <typename T>
void save_filter_bank(const FilterBank<T>& bank, const std::string& dir);
template <typename T>
FilterBank<T> load_filter_bank(const std::string& dir);

// ---- 1-D continuous wavelet transform ----------------------------------

enum class Mother { Morlet, Paul, Dog };

Mother mother_from_string(const std::string& name);
std::string mother_name(Mother m);

// Scale (in samples) whose peak spectral response sits at the given
// frequency (cycles per sample), using the standard Fourier-period
// relations: Morlet omega0=6, Paul m=4, DoG m=2.
double scale_for_frequency(Mother m, double freq_cycles_per_sample);

// Frequency-domain mother wavelet value at s*omega (omega in rad/sample).
double mother_hat(Mother m, double s_omega);

struct CwtResult {
  ComplexTensor<double> coeffs;     // (n_scales, n_samples)
  std::vector<std::uint8_t> valid;  // cone-of-influence row flags
};

// FFT-based CWT at the signal's native length (circular). Scales are in
// samples; rows whose scale exceeds the signal duration are flagged invalid.
CwtResult cwt_1d(const std::vector<double>& signal, Mother m,
                 const std::vector<double>& scales);

// Geometric frequency grid [fmin_hz, fmax_hz] mapped to scales. Row 0 is the
// lowest frequency (largest scale).
std::vector<double> cwt_scale_grid(Mother m, double fs_hz, int n_scales,
                                   double fmin_hz, double fmax_hz);

}  // namespace sf::wavelets
