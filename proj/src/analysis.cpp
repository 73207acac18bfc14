// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the scatterformer authors
#include "sf/analysis.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "sf/fft.hpp"
#include "sf/rng.hpp"

namespace sf::analysis {

using std::numbers::pi;

namespace {

SpectrumProfile profile_impl(const Tensor<double>& fmap, double hf_cutoff,
                             bool enforce_min_dims) {
  if (fmap.rank() != 3) throw std::invalid_argument("radial_spectrum: expects (C, H, W)");
  const std::int64_t C = fmap.shape[0], H = fmap.shape[1], W = fmap.shape[2];
  if (enforce_min_dims && (H < 8 || W < 8))
    throw std::invalid_argument("radial_spectrum: needs H, W >= 8");

  const std::int64_t hp = fft::next_pow2(H), wp = fft::next_pow2(W);
  Tensor<double> power({hp, wp});
  for (std::int64_t c = 0; c < C; ++c) {
    Tensor<double> plane({H, W});
    std::copy_n(fmap.ptr() + c * H * W, H * W, plane.ptr());
    auto spec = fft::fft2(plane, /*pad_to_pow2=*/true);
    for (std::int64_t i = 0; i < hp * wp; ++i)
      power.data[static_cast<std::size_t>(i)] +=
          spec.re[static_cast<std::size_t>(i)] * spec.re[static_cast<std::size_t>(i)] +
          spec.im[static_cast<std::size_t>(i)] * spec.im[static_cast<std::size_t>(i)];
  }
  for (auto& v : power.data) v /= static_cast<double>(C);

  const auto nbins = std::max<std::int64_t>(std::min(H, W) / 2, 1);
  SpectrumProfile prof;
  prof.radial_freq.resize(static_cast<std::size_t>(nbins));
  std::vector<double> energy(static_cast<std::size_t>(nbins), 0.0);
  std::vector<double> counts(static_cast<std::size_t>(nbins), 0.0);
  for (std::int64_t b = 0; b < nbins; ++b)
    prof.radial_freq[static_cast<std::size_t>(b)] =
        (static_cast<double>(b) + 0.5) * 0.5 / static_cast<double>(nbins);

  double hf = 0.0, total = 0.0;
  for (std::int64_t u = 0; u < hp; ++u) {
    const double fy = static_cast<double>(u <= hp / 2 ? u : u - hp) / static_cast<double>(hp);
    for (std::int64_t v = 0; v < wp; ++v) {
      const double fx = static_cast<double>(v <= wp / 2 ? v : v - wp) / static_cast<double>(wp);
      const double r = std::hypot(fy, fx);
      const double p = power.at2(u, v);
      auto bin = static_cast<std::int64_t>(r / 0.5 * static_cast<double>(nbins));
      bin = std::min(bin, nbins - 1);  // the corner annulus folds into the last bin
      energy[static_cast<std::size_t>(bin)] += p;
      counts[static_cast<std::size_t>(bin)] += 1.0;
      total += p;
      if (r > hf_cutoff) hf += p;
    }
  }
  prof.magnitude.resize(static_cast<std::size_t>(nbins));
  for (std::int64_t b = 0; b < nbins; ++b) {
    const auto k = static_cast<std::size_t>(b);
    prof.magnitude[k] = std::log(energy[k] / std::max(counts[k], 1.0) + 1e-20);
  }
  prof.total_energy = total;
  prof.hf_ratio = total > 0 ? hf / total : 0.0;
  return prof;
}

}  // namespace

SpectrumProfile radial_spectrum(const Tensor<double>& fmap, double hf_cutoff) {
  return profile_impl(fmap, hf_cutoff, /*enforce_min_dims=*/true);
}

SpectrumProfile radial_spectrum(const Tensor<float>& fmap, double hf_cutoff) {
  return radial_spectrum(fmap.cast<double>(), hf_cutoff);
}

template <typename T>
BranchSpectra branch_spectrum_report(model::Model<T>& m, const Tensor<T>& batch, int stage,
                                     double hf_cutoff) {
  if (!m.has_faa())
    throw std::invalid_argument("branch_spectrum_report: variant has no FAA branches");
  if (stage < 1 || stage > 4)
    throw std::invalid_argument("branch_spectrum_report: stage must be 1..4");
  model::ForwardCapture<T> cap;
  cap.stage = stage;
  ad::Tape<T> tape;
  tape.recording = false;
  (void)m.forward(tape, batch, /*train=*/false, &cap);
  if (cap.faa.high_upsampled.data.empty())
    throw std::runtime_error("branch_spectrum_report: no FAA capture at this stage");

  auto merge_batch = [](const Tensor<T>& t) {
    // (N, C, H, W) -> (N*C, H, W): channel-average covers the batch too
    Tensor<double> out({t.shape[0] * t.shape[1], t.shape[2], t.shape[3]});
    for (std::int64_t i = 0; i < t.numel(); ++i)
      out.data[static_cast<std::size_t>(i)] = static_cast<double>(t.data[static_cast<std::size_t>(i)]);
    return out;
  };
  BranchSpectra out;
  out.high = profile_impl(merge_batch(cap.faa.high_upsampled), hf_cutoff, false);
  out.low = profile_impl(merge_batch(cap.faa.low), hf_cutoff, false);
  out.fused = profile_impl(merge_batch(cap.faa.fused), hf_cutoff, false);
  out.hf_ratio_diff = out.high.hf_ratio - out.low.hf_ratio;
  return out;
}

// ---- theorem tooling -----------------------------------------------------

double theorem1_bound_term(const BoundInputs& in) {
  if (in.features.rank() != 4)
    throw std::invalid_argument("theorem1_bound_term: features must be (N, Sy, Sx, D)");
  if (in.shifts.empty())
    throw std::invalid_argument("theorem1_bound_term: empty shift set");
  if (in.d < 2.0) throw std::invalid_argument("theorem1_bound_term: requires d >= 2");
  const std::int64_t N = in.features.shape[0], Sy = in.features.shape[1],
                     Sx = in.features.shape[2], D = in.features.shape[3];
  if (N < 1) throw std::invalid_argument("theorem1_bound_term: requires N >= 1");

  auto at = [&](std::int64_t n, std::int64_t y, std::int64_t x, std::int64_t k) {
    return in.features.data[static_cast<std::size_t>(((n * Sy + y) * Sx + x) * D + k)];
  };
  double best = 0.0;
  for (const auto& shift : in.shifts) {
    const int dy = shift[0], dx = shift[1];
    for (std::int64_t y = 0; y < Sy; ++y) {
      if (y + dy < 0 || y + dy >= Sy) continue;
      for (std::int64_t x = 0; x < Sx; ++x) {
        if (x + dx < 0 || x + dx >= Sx) continue;
        double acc = 0.0;
        for (std::int64_t n = 0; n < N; ++n)
          for (std::int64_t k = 0; k < D; ++k) {
            const double diff = at(n, y, x, k) - at(n, y + dy, x + dx, k);
            acc += diff * diff;
          }
        best = std::max(best, acc);
      }
    }
  }
  return in.c * in.B * std::sqrt(std::log(in.d)) / static_cast<double>(N) * std::sqrt(best);
}

Theorem2Report theorem2_verify(const wavelets::MorletParams& params, int trials,
                               std::uint64_t seed) {
  if (trials < 100) throw std::invalid_argument("theorem2_verify: needs at least 100 trials");
  Theorem2Report rep;
  rep.constant = wavelets::morlet_lipschitz_constant(params);
  rep.contractive = rep.constant < 1.0;

  Rng rng = Rng::derive(seed, {0x7432u});
  for (int t = 0; t < trials; ++t) {
    const double u = rng.uniform(-3.0, 3.0);
    const double v = rng.uniform(-3.0, 3.0);
    if (std::fabs(u - v) < 1e-6) continue;  // degenerate pairs excluded
    const double ratio =
        std::fabs(wavelets::morlet_map(u, params) - wavelets::morlet_map(v, params)) /
        std::fabs(u - v);
    rep.max_empirical_ratio = std::max(rep.max_empirical_ratio, ratio);
    rep.ratio_pairs += 1;
  }

  // paired bound evaluation on random unit-feature datasets
  const int datasets = 20;
  rep.datasets = datasets;
  for (int ds = 0; ds < datasets; ++ds) {
    const std::int64_t N = 6, Sy = 5, Sx = 5, D = 3;
    BoundInputs before;
    before.features = Tensor<double>({N, Sy, Sx, D});
    Rng drng = Rng::derive(seed, {0xDA7Au, static_cast<std::uint64_t>(ds)});
    for (std::int64_t i = 0; i < before.features.numel() / D; ++i) {
      double vec[8];
      double norm = 0;
      for (std::int64_t k = 0; k < D; ++k) {
        vec[k] = drng.normal();
        norm += vec[k] * vec[k];
      }
      norm = std::sqrt(norm);
      for (std::int64_t k = 0; k < D; ++k)
        before.features.data[static_cast<std::size_t>(i * D + k)] = vec[k] / norm;
    }
    before.shifts = {{0, 1}, {1, 0}};
    before.d = 16.0;
    BoundInputs after = before;
    for (auto& v : after.features.data) v = wavelets::morlet_map(v, params);
    if (theorem1_bound_term(after) <= theorem1_bound_term(before) + 1e-12)
      rep.bound_decreased += 1;
  }
  rep.holds = rep.max_empirical_ratio <= rep.constant &&
              (!rep.contractive || rep.bound_decreased == rep.datasets);
  return rep;
}

Theorem3Report theorem3_verify(const FourierFeatureParams& params,
                               const Tensor<double>& feature_pairs) {
  if (feature_pairs.rank() != 3 || feature_pairs.shape[1] != 2)
    throw std::invalid_argument("theorem3_verify: features must be (N, 2, d)");
  const std::int64_t N = feature_pairs.shape[0], d = feature_pairs.shape[2];
  const std::size_t m = params.amplitudes.size();
  if (m == 0 || params.frequencies.size() != m)
    throw std::invalid_argument("theorem3_verify: needs m >= 1 matching amplitudes/frequencies");
  for (const auto& b : params.frequencies)
    if (static_cast<std::int64_t>(b.size()) != d)
      throw std::invalid_argument("theorem3_verify: frequency dimension mismatch");
  for (std::int64_t i = 0; i < N; ++i) {
    for (int side = 0; side < 2; ++side) {
      double norm = 0;
      for (std::int64_t k = 0; k < d; ++k) {
        const double v =
            feature_pairs.data[static_cast<std::size_t>((i * 2 + side) * d + k)];
        norm += v * v;
      }
      if (std::fabs(std::sqrt(norm) - 1.0) > 1e-6)
        throw std::invalid_argument("theorem3_verify: features must be unit normalized");
    }
  }

  Theorem3Report rep;
  double raw_dist = 0.0;
  for (std::int64_t i = 0; i < N; ++i) {
    for (std::size_t k = 0; k < m; ++k) {
      double proj = 0.0;
      for (std::int64_t c = 0; c < d; ++c)
        proj += params.frequencies[k][static_cast<std::size_t>(c)] *
                (feature_pairs.data[static_cast<std::size_t>((i * 2) * d + c)] -
                 feature_pairs.data[static_cast<std::size_t>((i * 2 + 1) * d + c)]);
      // ||gamma(u) - gamma(v)||^2 = sum_k 2 a_k^2 (1 - cos(2 pi b_k . (u - v)))
      rep.lhs += 2.0 * params.amplitudes[k] * params.amplitudes[k] *
                 (1.0 - std::cos(2.0 * pi * proj));
    }
    double dist = 0.0;
    for (std::int64_t c = 0; c < d; ++c) {
      const double diff = feature_pairs.data[static_cast<std::size_t>((i * 2) * d + c)] -
                          feature_pairs.data[static_cast<std::size_t>((i * 2 + 1) * d + c)];
      dist += diff * diff;
    }
    raw_dist += dist;
  }
  double amp_sq = 0.0;
  for (double a : params.amplitudes) amp_sq += a * a;
  rep.bound = 4.0 * static_cast<double>(N) * amp_sq;
  rep.holds = rep.lhs <= rep.bound + 1e-9;
  rep.amplitude_condition = rep.bound < raw_dist;
  return rep;
}

double feature_correlation(const Tensor<double>& features, int dy, int dx) {
  if (features.rank() != 4)
    throw std::invalid_argument("feature_correlation: features must be (N, Sy, Sx, D)");
  const std::int64_t N = features.shape[0], Sy = features.shape[1], Sx = features.shape[2],
                     D = features.shape[3];
  if (N < 2) throw std::invalid_argument("feature_correlation: needs at least 2 samples");
  auto at = [&](std::int64_t n, std::int64_t y, std::int64_t x, std::int64_t k) {
    return features.data[static_cast<std::size_t>(((n * Sy + y) * Sx + x) * D + k)];
  };
  double acc = 0.0;
  std::int64_t terms = 0;
  for (std::int64_t y = 0; y < Sy; ++y) {
    if (y + dy < 0 || y + dy >= Sy) continue;
    for (std::int64_t x = 0; x < Sx; ++x) {
      if (x + dx < 0 || x + dx >= Sx) continue;
      for (std::int64_t k = 0; k < D; ++k) {
        double ma = 0, mb = 0;
        for (std::int64_t n = 0; n < N; ++n) {
          ma += at(n, y, x, k);
          mb += at(n, y + dy, x + dx, k);
        }
        ma /= static_cast<double>(N);
        mb /= static_cast<double>(N);
        double cov = 0;
        for (std::int64_t n = 0; n < N; ++n)
          cov += (at(n, y, x, k) - ma) * (at(n, y + dy, x + dx, k) - mb);
        acc += cov / static_cast<double>(N);
        ++terms;
      }
    }
  }
  return terms > 0 ? acc / static_cast<double>(terms) : 0.0;
}

template BranchSpectra branch_spectrum_report<float>(model::Model<float>&,
                                                     const Tensor<float>&, int, double);
template BranchSpectra branch_spectrum_report<double>(model::Model<double>&,
                                                      const Tensor<double>&, int, double);

}  // namespace sf::analysis
