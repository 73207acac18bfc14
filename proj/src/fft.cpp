// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the scatterformer authors
#include "sf/fft.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "sf/kernels.hpp"

namespace sf::fft {

bool is_pow2(std::int64_t n) { return n > 0 && (n & (n - 1)) == 0; }

std::int64_t next_pow2(std::int64_t n) {
  std::int64_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

namespace {

template <typename T>
struct Radix2Plan {
  std::int64_t n;
  std::vector<std::uint32_t> bitrev;
  std::vector<T> twr, twi;  // exp(-2*pi*i*k/n), k < n/2

  explicit Radix2Plan(std::int64_t n_) : n(n_) {
    bitrev.resize(static_cast<std::size_t>(n));
    int log2n = 0;
    while ((std::int64_t{1} << log2n) < n) ++log2n;
    for (std::int64_t i = 0; i < n; ++i) {
      std::uint32_t r = 0;
      for (int b = 0; b < log2n; ++b)
        if (i & (std::int64_t{1} << b)) r |= 1u << (log2n - 1 - b);
      bitrev[static_cast<std::size_t>(i)] = r;
    }
    twr.resize(static_cast<std::size_t>(n / 2));
    twi.resize(static_cast<std::size_t>(n / 2));
    for (std::int64_t k = 0; k < n / 2; ++k) {
      double ang = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
      twr[static_cast<std::size_t>(k)] = static_cast<T>(std::cos(ang));
      twi[static_cast<std::size_t>(k)] = static_cast<T>(std::sin(ang));
    }
  }
};

template <typename T>
const Radix2Plan<T>& plan_for(std::int64_t n) {
  static std::map<std::int64_t, std::unique_ptr<Radix2Plan<T>>> cache;
  static std::mutex mtx;
  std::lock_guard<std::mutex> lk(mtx);
  auto it = cache.find(n);
  if (it == cache.end())
    it = cache.emplace(n, std::make_unique<Radix2Plan<T>>(n)).first;
  return *it->second;
}

// Radix-2 without the unitary scaling (applied by callers once).
template <typename T>
void fft_pow2_raw(T* re, T* im, std::int64_t n, bool inverse) {
  if (n == 1) return;
  const auto& plan = plan_for<T>(n);
  for (std::int64_t i = 0; i < n; ++i) {
    std::int64_t j = plan.bitrev[static_cast<std::size_t>(i)];
    if (j > i) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }
  for (std::int64_t len = 2; len <= n; len <<= 1) {
    const std::int64_t half = len >> 1;
    const std::int64_t step = n / len;
    for (std::int64_t base = 0; base < n; base += len) {
      for (std::int64_t k = 0; k < half; ++k) {
        const std::size_t ti = static_cast<std::size_t>(k * step);
        T wr = plan.twr[ti];
        T wi = inverse ? -plan.twi[ti] : plan.twi[ti];
        const std::int64_t a = base + k, b = base + k + half;
        T vr = re[b] * wr - im[b] * wi;
        T vi = re[b] * wi + im[b] * wr;
        T ur = re[a], ui = im[a];
        re[a] = ur + vr;
        im[a] = ui + vi;
        re[b] = ur - vr;
        im[b] = ui - vi;
      }
    }
  }
}

template <typename T>
struct BluesteinPlan {
  std::int64_t n, m;
  std::vector<T> cr, ci;    // chirp exp(-i*pi*k^2/n)
  std::vector<T> bhr, bhi;  // raw FFT of the chirp kernel at length m

  explicit BluesteinPlan(std::int64_t n_) : n(n_), m(next_pow2(2 * n_ - 1)) {
    cr.resize(static_cast<std::size_t>(n));
    ci.resize(static_cast<std::size_t>(n));
    for (std::int64_t k = 0; k < n; ++k) {
      // k^2 mod 2n keeps the phase argument small.
      std::int64_t k2 = (k * k) % (2 * n);
      double ang = -std::numbers::pi * static_cast<double>(k2) / static_cast<double>(n);
      cr[static_cast<std::size_t>(k)] = static_cast<T>(std::cos(ang));
      ci[static_cast<std::size_t>(k)] = static_cast<T>(std::sin(ang));
    }
    bhr.assign(static_cast<std::size_t>(m), T(0));
    bhi.assign(static_cast<std::size_t>(m), T(0));
    for (std::int64_t k = 0; k < n; ++k) {
      // b_k = conj(chirp_k), wrapped circularly.
      bhr[static_cast<std::size_t>(k)] = cr[static_cast<std::size_t>(k)];
      bhi[static_cast<std::size_t>(k)] = -ci[static_cast<std::size_t>(k)];
      if (k > 0) {
        bhr[static_cast<std::size_t>(m - k)] = cr[static_cast<std::size_t>(k)];
        bhi[static_cast<std::size_t>(m - k)] = -ci[static_cast<std::size_t>(k)];
      }
    }
    fft_pow2_raw(bhr.data(), bhi.data(), m, false);
  }
};

template <typename T>
const BluesteinPlan<T>& bluestein_for(std::int64_t n) {
  static std::map<std::int64_t, std::unique_ptr<BluesteinPlan<T>>> cache;
  static std::mutex mtx;
  std::lock_guard<std::mutex> lk(mtx);
  auto it = cache.find(n);
  if (it == cache.end())
    it = cache.emplace(n, std::make_unique<BluesteinPlan<T>>(n)).first;
  return *it->second;
}

template <typename T>
void fft_bluestein_raw(T* re, T* im, std::int64_t n) {
  const auto& p = bluestein_for<T>(n);
  const std::int64_t m = p.m;
  std::vector<T> ar(static_cast<std::size_t>(m), T(0)), ai(static_cast<std::size_t>(m), T(0));
  for (std::int64_t k = 0; k < n; ++k) {
    const std::size_t ks = static_cast<std::size_t>(k);
    ar[ks] = re[k] * p.cr[ks] - im[k] * p.ci[ks];
    ai[ks] = re[k] * p.ci[ks] + im[k] * p.cr[ks];
  }
  fft_pow2_raw(ar.data(), ai.data(), m, false);
  kernels::cmul(ar.data(), ai.data(), p.bhr.data(), p.bhi.data(), ar.data(), ai.data(),
                static_cast<std::size_t>(m));
  fft_pow2_raw(ar.data(), ai.data(), m, true);
  const T inv_m = T(1) / static_cast<T>(m);
  for (std::int64_t k = 0; k < n; ++k) {
    const std::size_t ks = static_cast<std::size_t>(k);
    T vr = ar[ks] * inv_m, vi = ai[ks] * inv_m;
    re[k] = vr * p.cr[ks] - vi * p.ci[ks];
    im[k] = vr * p.ci[ks] + vi * p.cr[ks];
  }
}

}  // namespace

template <typename T>
void fft1d(T* re, T* im, std::int64_t n, bool inverse) {
  if (n < 1) throw std::invalid_argument("fft length must be >= 1");
  if (is_pow2(n)) {
    fft_pow2_raw(re, im, n, inverse);
  } else if (!inverse) {
    fft_bluestein_raw(re, im, n);
  } else {
    // inverse via conjugation: ifft(x) = conj(fft(conj(x))) / n (raw)
    for (std::int64_t i = 0; i < n; ++i) im[i] = -im[i];
    fft_bluestein_raw(re, im, n);
    for (std::int64_t i = 0; i < n; ++i) im[i] = -im[i];
  }
  const T s = T(1) / std::sqrt(static_cast<T>(n));
  kernels::scale(s, re, static_cast<std::size_t>(n));
  kernels::scale(s, im, static_cast<std::size_t>(n));
}

template <typename T>
void fft2_inplace(ComplexTensor<T>& x, bool inverse) {
  if (x.shape.size() != 2) throw std::invalid_argument("fft2 expects a 2-D tensor");
  const std::int64_t h = x.shape[0], w = x.shape[1];
  for (std::int64_t r = 0; r < h; ++r)
    fft1d(x.re.data() + r * w, x.im.data() + r * w, w, inverse);
  std::vector<T> cr(static_cast<std::size_t>(h)), ci(static_cast<std::size_t>(h));
  for (std::int64_t c = 0; c < w; ++c) {
    for (std::int64_t r = 0; r < h; ++r) {
      cr[static_cast<std::size_t>(r)] = x.re[static_cast<std::size_t>(r * w + c)];
      ci[static_cast<std::size_t>(r)] = x.im[static_cast<std::size_t>(r * w + c)];
    }
    fft1d(cr.data(), ci.data(), h, inverse);
    for (std::int64_t r = 0; r < h; ++r) {
      x.re[static_cast<std::size_t>(r * w + c)] = cr[static_cast<std::size_t>(r)];
      x.im[static_cast<std::size_t>(r * w + c)] = ci[static_cast<std::size_t>(r)];
    }
  }
}

template <typename T>
ComplexTensor<T> fft2(const Tensor<T>& x, bool pad_to_pow2) {
  if (x.rank() != 2) throw std::invalid_argument("fft2 expects a 2-D tensor");
  std::int64_t h = x.shape[0], w = x.shape[1];
  if (h < 1 || w < 1) throw std::invalid_argument("fft2 dims must be >= 1");
  std::int64_t H = h, W = w;
  if (!is_pow2(h) || !is_pow2(w)) {
    if (!pad_to_pow2)
      throw std::invalid_argument(
          "fft2: dims " + shape_str(x.shape) +
          " are not powers of two; pass pad_to_pow2=true to zero-pad");
    H = next_pow2(h);
    W = next_pow2(w);
  }
  ComplexTensor<T> out({H, W});
  for (std::int64_t r = 0; r < h; ++r)
    for (std::int64_t c = 0; c < w; ++c)
      out.re[static_cast<std::size_t>(r * W + c)] = x.data[static_cast<std::size_t>(r * w + c)];
  fft2_inplace(out, false);
  return out;
}

template <typename T>
ComplexTensor<T> fft2c(const ComplexTensor<T>& x) {
  ComplexTensor<T> out = x;
  fft2_inplace(out, false);
  return out;
}

template <typename T>
ComplexTensor<T> ifft2(const ComplexTensor<T>& x) {
  ComplexTensor<T> out = x;
  fft2_inplace(out, true);
  return out;
}

template <typename T>
Tensor<T> ifft2_real(const ComplexTensor<T>& x) {
  ComplexTensor<T> out = ifft2(x);
  Tensor<T> r(out.shape);
  r.data = std::move(out.re);
  return r;
}

template <typename T>
ComplexTensor<T> conv2d_fft(const Tensor<T>& x, const ComplexTensor<T>& filter_hat) {
  if (filter_hat.shape.size() != 2)
    throw std::invalid_argument("conv2d_fft: filter must be 2-D");
  ComplexTensor<T> spec = fft2(x, /*pad_to_pow2=*/false);
  if (spec.shape != filter_hat.shape)
    throw std::invalid_argument("conv2d_fft: filter shape " + shape_str(filter_hat.shape) +
                                " does not match input spectrum " + shape_str(spec.shape));
  kernels::cmul(spec.re.data(), spec.im.data(), filter_hat.re.data(), filter_hat.im.data(),
                spec.re.data(), spec.im.data(), static_cast<std::size_t>(spec.numel()));
  fft2_inplace(spec, true);
  return spec;
}

template <typename T>
ComplexTensor<T> transfer_of_kernel(const Tensor<T>& h) {
  ComplexTensor<T> H = fft2(h, false);
  const T s = std::sqrt(static_cast<T>(h.numel()));
  kernels::scale(s, H.re.data(), H.re.size());
  kernels::scale(s, H.im.data(), H.im.size());
  return H;
}

template <typename T>
ComplexTensor<T> fold_spectrum(const ComplexTensor<T>& x, int kh, int kw) {
  const std::int64_t H = x.shape[0], W = x.shape[1];
  if (H % kh != 0 || W % kw != 0)
    throw std::invalid_argument("fold_spectrum: factors must divide the shape");
  const std::int64_t h = H / kh, w = W / kw;
  ComplexTensor<T> out({h, w});
  for (int a = 0; a < kh; ++a) {
    for (int b = 0; b < kw; ++b) {
      for (std::int64_t r = 0; r < h; ++r) {
        const T* sr = x.re.data() + (r + a * h) * W + b * w;
        const T* si = x.im.data() + (r + a * h) * W + b * w;
        kernels::vadd(out.re.data() + r * w, sr, out.re.data() + r * w, static_cast<std::size_t>(w));
        kernels::vadd(out.im.data() + r * w, si, out.im.data() + r * w, static_cast<std::size_t>(w));
      }
    }
  }
  const T s = T(1) / std::sqrt(static_cast<T>(kh) * static_cast<T>(kw));
  kernels::scale(s, out.re.data(), out.re.size());
  kernels::scale(s, out.im.data(), out.im.size());
  return out;
}

template <typename T>
ComplexTensor<T> tile_spectrum(const ComplexTensor<T>& x, int kh, int kw,
                               std::int64_t H, std::int64_t W) {
  const std::int64_t h = x.shape[0], w = x.shape[1];
  if (h * kh != H || w * kw != W)
    throw std::invalid_argument("tile_spectrum: target shape mismatch");
  ComplexTensor<T> out({H, W});
  const T s = T(1) / std::sqrt(static_cast<T>(kh) * static_cast<T>(kw));
  for (std::int64_t r = 0; r < H; ++r) {
    const std::int64_t rs = r % h;
    for (std::int64_t c = 0; c < W; ++c) {
      const std::int64_t cs = c % w;
      out.re[static_cast<std::size_t>(r * W + c)] = s * x.re[static_cast<std::size_t>(rs * w + cs)];
      out.im[static_cast<std::size_t>(r * W + c)] = s * x.im[static_cast<std::size_t>(rs * w + cs)];
    }
  }
  return out;
}

#define SF_INSTANTIATE(T)                                                            \
  template void fft1d<T>(T*, T*, std::int64_t, bool);                               \
  template void fft2_inplace<T>(ComplexTensor<T>&, bool);                           \
  template ComplexTensor<T> fft2<T>(const Tensor<T>&, bool);                        \
  template ComplexTensor<T> fft2c<T>(const ComplexTensor<T>&);                      \
  template ComplexTensor<T> ifft2<T>(const ComplexTensor<T>&);                      \
  template Tensor<T> ifft2_real<T>(const ComplexTensor<T>&);                        \
  template ComplexTensor<T> conv2d_fft<T>(const Tensor<T>&, const ComplexTensor<T>&); \
  template ComplexTensor<T> transfer_of_kernel<T>(const Tensor<T>&);                \
  template ComplexTensor<T> fold_spectrum<T>(const ComplexTensor<T>&, int, int);    \
  template ComplexTensor<T> tile_spectrum<T>(const ComplexTensor<T>&, int, int, std::int64_t, std::int64_t);

SF_INSTANTIATE(float)
SF_INSTANTIATE(double)
#undef SF_INSTANTIATE

}  // namespace sf::fft
