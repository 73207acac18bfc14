// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the scatterformer authors
#pragma once

#include <cmath>
#include <numbers>

#include "sf/fft.hpp"
#include "sf/rng.hpp"
#include "sf/tensor.hpp"

namespace sf::textures {

// Synthetic texture sampler backing the scattering energy suite and the
// feature-correlation studies: smooth power-law random fields plus oriented
// gratings with 1/f amplitudes and a few Gaussian blobs. Statistics sit in
// the same smooth, low-frequency-dominated regime as the CWT log-power
// images the models consume.
inline Tensor<double> sample(std::int64_t h, std::int64_t w, Rng& rng,
                             double spectral_exponent = 2.0,
                             double max_grating_freq = 1.2) {
  using std::numbers::pi;
  ComplexTensor<double> spec({h, w});
  for (std::int64_t u = 0; u < h; ++u) {
    for (std::int64_t v = 0; v < w; ++v) {
      const double fu = 2.0 * pi * static_cast<double>(u <= h / 2 ? u : u - h) / h;
      const double fv = 2.0 * pi * static_cast<double>(v <= w / 2 ? v : v - w) / w;
      const double g = 1.0 / std::pow(0.3 + std::hypot(fu, fv), spectral_exponent);
      spec.re[static_cast<std::size_t>(u * w + v)] = rng.normal() * g;
      spec.im[static_cast<std::size_t>(u * w + v)] = rng.normal() * g;
    }
  }
  auto field = fft::ifft2(spec);
  Tensor<double> x({h, w});
  x.data = std::move(field.re);

  const int gratings = 2 + static_cast<int>(rng.uniform_int(3));
  for (int k = 0; k < gratings; ++k) {
    const double fr = rng.uniform(0.15, max_grating_freq);
    const double th = rng.uniform(0.0, pi);
    const double ph = rng.uniform(0.0, 2.0 * pi);
    const double amp = rng.uniform(0.3, 1.2) / (0.5 + fr);
    const double cy = std::cos(th) * fr, cx = std::sin(th) * fr;
    for (std::int64_t r = 0; r < h; ++r)
      for (std::int64_t c = 0; c < w; ++c)
        x.at2(r, c) += amp * std::cos(cy * r + cx * c + ph);
  }

  const int blobs = 1 + static_cast<int>(rng.uniform_int(3));
  for (int k = 0; k < blobs; ++k) {
    const double cy = rng.uniform(0.0, static_cast<double>(h));
    const double cx = rng.uniform(0.0, static_cast<double>(w));
    const double s = rng.uniform(3.0, 10.0);
    const double amp = rng.uniform(-1.5, 1.5);
    for (std::int64_t r = 0; r < h; ++r)
      for (std::int64_t c = 0; c < w; ++c) {
        const double dy = r - cy, dx = c - cx;
        x.at2(r, c) += amp * std::exp(-(dy * dy + dx * dx) / (2.0 * s * s));
      }
  }
  return x;
}

}  // namespace sf::textures
