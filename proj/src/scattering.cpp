// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the scatterformer authors
#include "sf/scattering.hpp"

#include <cmath>
#include <stdexcept>

#include "sf/fft.hpp"
#include "sf/kernels.hpp"

namespace sf::scattering {

template <typename T>
double grid_energy(const Tensor<T>& m) {
  double acc = 0.0;
  for (const T v : m.data) acc += static_cast<double>(v) * static_cast<double>(v);
  return acc / static_cast<double>(m.numel());
}

std::vector<Path> admissible_paths(int J, int L, int order) {
  std::vector<Path> out;
  if (order == 1) {
    for (int j = 1; j <= J; ++j)
      for (int l = 0; l < L; ++l) out.push_back({{j, l}});
  } else if (order == 2) {
    for (int j1 = 1; j1 <= J; ++j1)
      for (int l1 = 0; l1 < L; ++l1)
        for (int j2 = j1 + 1; j2 <= J; ++j2)
          for (int l2 = 0; l2 < L; ++l2) out.push_back({{j1, l1}, {j2, l2}});
  }
  return out;
}

namespace {

template <typename T>
void mul_real_filter(ComplexTensor<T>& spec, const Tensor<T>& filt) {
  kernels::cmul_real(spec.re.data(), spec.im.data(), filt.ptr(), spec.re.data(),
                     spec.im.data(), static_cast<std::size_t>(spec.numel()));
}

// |ifft(spec folded to target resolution)|
template <typename T>
Tensor<T> modulus_at(const ComplexTensor<T>& spec, int fold_log2) {
  ComplexTensor<T> s = fold_log2 > 0
                           ? fft::fold_spectrum(spec, 1 << fold_log2, 1 << fold_log2)
                           : spec;
  fft::fft2_inplace(s, true);
  Tensor<T> out(s.shape);
  kernels::cmodulus(s.re.data(), s.im.data(), out.ptr(),
                    static_cast<std::size_t>(out.numel()));
  return out;
}

// Real part of ifft at a reduced resolution, clamped at zero (the maps are
// convolutions of nonnegative fields with a nonnegative kernel; negatives
// are rounding noise).
template <typename T>
Tensor<T> lowpassed_at(const ComplexTensor<T>& spec, int fold_log2, bool clamp) {
  ComplexTensor<T> s = fold_log2 > 0
                           ? fft::fold_spectrum(spec, 1 << fold_log2, 1 << fold_log2)
                           : spec;
  fft::fft2_inplace(s, true);
  Tensor<T> out(s.shape);
  out.data = std::move(s.re);
  if (clamp)
    for (auto& v : out.data)
      if (v < T(0)) v = T(0);
  return out;
}

}  // namespace

template <typename T>
ScatteringCoeffs<T> scattering_transform(const Tensor<T>& x,
                                         const wavelets::FilterBank<T>& bank,
                                         int max_order, const Options& opts) {
  if (x.rank() != 2 || x.shape[0] != bank.h || x.shape[1] != bank.w)
    throw std::invalid_argument("scattering_transform: input " + shape_str(x.shape) +
                                " does not match bank size (" + std::to_string(bank.h) +
                                "," + std::to_string(bank.w) + ")");
  if (max_order < 0 || max_order > 2)
    throw std::invalid_argument("scattering_transform: max_order must be 0, 1 or 2");

  const int J = bank.J, L = bank.L;
  auto res_of = [&](int j) {
    return opts.subsample ? std::max(j - opts.oversampling, 0) : 0;
  };
  const int out_res = opts.subsample ? J : 0;

  ScatteringCoeffs<T> out;
  out.subsample_log2 = out_res;
  out.input_energy = grid_energy(x);

  ComplexTensor<T> spec = fft::fft2(x, /*pad_to_pow2=*/false);

  {
    ComplexTensor<T> s0 = spec;
    mul_real_filter(s0, bank.phi(0));
    out.order0 = lowpassed_at(s0, out_res, /*clamp=*/false);
    out.energy_by_order[0] = grid_energy(out.order0);
  }
  if (max_order == 0) return out;

  for (int j1 = 1; j1 <= J; ++j1) {
    const int r1 = res_of(j1);
    for (int l1 = 0; l1 < L; ++l1) {
      ComplexTensor<T> band = spec;
      mul_real_filter(band, bank.psi(j1, l1, 0));
      Tensor<T> u1 = modulus_at(band, r1);

      // Spectrum of U1 feeds both the order-1 low-pass and the order-2 bands.
      ComplexTensor<T> u1spec = fft::fft2(u1, false);
      {
        ComplexTensor<T> s1 = u1spec;
        mul_real_filter(s1, bank.phi(r1));
        Tensor<T> m = lowpassed_at(s1, out_res - r1, /*clamp=*/true);
        out.energy_by_order[1] += grid_energy(m);
        out.order1.emplace_back(Path{{j1, l1}}, std::move(m));
      }
      if (max_order < 2) continue;

      for (int j2 = j1 + 1; j2 <= J; ++j2) {
        const int r2 = res_of(j2);
        for (int l2 = 0; l2 < L; ++l2) {
          ComplexTensor<T> band2 = u1spec;
          mul_real_filter(band2, bank.psi(j2, l2, r1));
          Tensor<T> u2 = modulus_at(band2, r2 - r1);
          ComplexTensor<T> u2spec = fft::fft2(u2, false);
          mul_real_filter(u2spec, bank.phi(r2));
          Tensor<T> m = lowpassed_at(u2spec, out_res - r2, /*clamp=*/true);
          out.energy_by_order[2] += grid_energy(m);
          out.order2.emplace_back(Path{{j1, l1}, {j2, l2}}, std::move(m));
        }
      }
    }
  }
  return out;
}

namespace {

template <typename T>
double sq_diff_sum(const ScatteringCoeffs<T>& a, const ScatteringCoeffs<T>& b) {
  auto add = [](const Tensor<T>& u, const Tensor<T>& v) {
    double acc = 0.0;
    for (std::int64_t i = 0; i < u.numel(); ++i) {
      const double d = double(u.data[static_cast<std::size_t>(i)]) -
                       double(v.data[static_cast<std::size_t>(i)]);
      acc += d * d;
    }
    return acc / static_cast<double>(u.numel());
  };
  double s = add(a.order0, b.order0);
  for (std::size_t i = 0; i < a.order1.size(); ++i)
    s += add(a.order1[i].second, b.order1[i].second);
  for (std::size_t i = 0; i < a.order2.size(); ++i)
    s += add(a.order2[i].second, b.order2[i].second);
  return s;
}

}  // namespace

template <typename T>
std::pair<double, double> contraction_check(const Tensor<T>& x, const Tensor<T>& y,
                                            const wavelets::FilterBank<T>& bank,
                                            int max_order) {
  if (!x.same_shape(y))
    throw std::invalid_argument("contraction_check: shapes differ");
  Options full;
  full.subsample = false;
  auto sx = scattering_transform(x, bank, max_order, full);
  auto sy = scattering_transform(y, bank, max_order, full);
  const double lhs = std::sqrt(sq_diff_sum(sx, sy));
  double d = 0.0;
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    const double e = double(x.data[static_cast<std::size_t>(i)]) -
                     double(y.data[static_cast<std::size_t>(i)]);
    d += e * e;
  }
  const double rhs = std::sqrt(d / static_cast<double>(x.numel()));
  return {lhs, rhs};
}

template <typename T>
double translation_sensitivity(const Tensor<T>& x, int dy, int dx,
                               const wavelets::FilterBank<T>& bank, int max_order) {
  const std::int64_t H = x.shape[0], W = x.shape[1];
  // Shifts act circularly, so reduce modulo the period before checking the
  // locality bound (a full-period shift is the identity).
  const std::int64_t my = ((dy % H) + H) % H, mx = ((dx % W) + W) % W;
  const std::int64_t ey = std::min(my, H - my), ex = std::min(mx, W - mx);
  if (ey > (std::int64_t{1} << bank.J) || ex > (std::int64_t{1} << bank.J))
    throw std::invalid_argument("translation_sensitivity: |shift| must be <= 2^J");
  Tensor<T> shifted({H, W});
  for (std::int64_t r = 0; r < H; ++r)
    for (std::int64_t c = 0; c < W; ++c)
      shifted.at2((r + my) % H, (c + mx) % W) = x.at2(r, c);

  Options full;
  full.subsample = false;
  auto s0 = scattering_transform(x, bank, max_order, full);
  auto s1 = scattering_transform(shifted, bank, max_order, full);

  double ref = s0.total_energy();
  if (ref <= 0.0)
    throw std::invalid_argument("translation_sensitivity: zero-energy input");
  return std::sqrt(sq_diff_sum(s0, s1)) / std::sqrt(ref);
}

#define SF_INST(T)                                                                     \
  template double grid_energy<T>(const Tensor<T>&);                                   \
  template ScatteringCoeffs<T> scattering_transform<T>(                               \
      const Tensor<T>&, const wavelets::FilterBank<T>&, int, const Options&);         \
  template std::pair<double, double> contraction_check<T>(                            \
      const Tensor<T>&, const Tensor<T>&, const wavelets::FilterBank<T>&, int);       \
  template double translation_sensitivity<T>(const Tensor<T>&, int, int,              \
                                             const wavelets::FilterBank<T>&, int);

SF_INST(float)
SF_INST(double)
#undef SF_INST

}  // namespace sf::scattering
