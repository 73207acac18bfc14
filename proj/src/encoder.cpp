// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the scatterformer authors
#include "sf/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "json.hpp"
#include "sf/fft.hpp"
#include "sf/wavelets.hpp"

namespace sf::enc {

using std::numbers::pi;

void EegEpoch::validate() const {
  if (n_samples <= 0 || channel_names.empty())
    throw std::invalid_argument("EegEpoch: empty epoch");
  if (static_cast<std::int64_t>(samples.size()) != n_samples * n_channels())
    throw std::invalid_argument("EegEpoch: sample buffer does not match T x C");
  for (double v : samples)
    if (!std::isfinite(v)) throw std::invalid_argument("EegEpoch: non-finite sample");
}

void save_epoch(const std::string& path, const EegEpoch& epoch) {
  epoch.validate();
  nlohmann::json h;
  h["fs"] = epoch.fs;
  h["channels"] = epoch.channel_names;
  h["samples"] = epoch.n_samples;
  h["subject"] = epoch.subject_id;
  h["label"] = epoch.label;
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write epoch file: " + path);
  f << h.dump() << "\n";
  std::vector<float> payload(epoch.samples.begin(), epoch.samples.end());
  f.write(reinterpret_cast<const char*>(payload.data()),
          static_cast<std::streamsize>(payload.size() * sizeof(float)));
}

EegEpoch load_epoch(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open epoch file: " + path);
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error("missing epoch header: " + path);
  nlohmann::json h = nlohmann::json::parse(line);
  EegEpoch e;
  e.fs = h.at("fs");
  e.channel_names = h.at("channels").get<std::vector<std::string>>();
  e.n_samples = h.at("samples");
  e.subject_id = h.at("subject");
  e.label = h.at("label");
  std::vector<float> payload(static_cast<std::size_t>(e.n_samples * e.n_channels()));
  f.read(reinterpret_cast<char*>(payload.data()),
         static_cast<std::streamsize>(payload.size() * sizeof(float)));
  if (f.gcount() != static_cast<std::streamsize>(payload.size() * sizeof(float)))
    throw std::runtime_error("epoch payload truncated: " + path);
  e.samples.assign(payload.begin(), payload.end());
  e.validate();
  return e;
}

MontageSpec MontageSpec::double_banana24() {
  return MontageSpec{{
      {"Fp1", "F7"}, {"F7", "T3"}, {"T3", "T5"}, {"T5", "O1"},
      {"Fp1", "F3"}, {"F3", "C3"}, {"C3", "P3"}, {"P3", "O1"},
      {"Fp2", "F8"}, {"F8", "T4"}, {"T4", "T6"}, {"T6", "O2"},
      {"Fp2", "F4"}, {"F4", "C4"}, {"C4", "P4"}, {"P4", "O2"},
      {"Fz", "Cz"}, {"Cz", "Pz"},
      {"F7", "F3"}, {"F4", "F8"},
      {"T3", "C3"}, {"C4", "T4"},
      {"T5", "P3"}, {"P4", "T6"},
  }};
}

MontageSpec MontageSpec::toy8() {
  auto full = double_banana24();
  full.pairs.resize(8);
  return full;
}

EegEpoch apply_montage(const EegEpoch& epoch, const MontageSpec& spec) {
  auto index_of = [&](const std::string& name) {
    for (std::size_t i = 0; i < epoch.channel_names.size(); ++i)
      if (epoch.channel_names[i] == name) return static_cast<std::int64_t>(i);
    throw std::invalid_argument("montage electrode not present in epoch: " + name);
  };
  EegEpoch out;
  out.fs = epoch.fs;
  out.n_samples = epoch.n_samples;
  out.subject_id = epoch.subject_id;
  out.label = epoch.label;
  for (const auto& [anode, cathode] : spec.pairs)
    out.channel_names.push_back(anode + "-" + cathode);
  out.samples.resize(static_cast<std::size_t>(out.n_samples * out.n_channels()));
  for (std::size_t k = 0; k < spec.pairs.size(); ++k) {
    const double* a = epoch.channel(index_of(spec.pairs[k].first));
    const double* c = epoch.channel(index_of(spec.pairs[k].second));
    double* o = out.channel(static_cast<std::int64_t>(k));
    for (std::int64_t i = 0; i < out.n_samples; ++i) o[i] = a[i] - c[i];
  }
  return out;
}

namespace {

struct Biquad {
  double b0, b1, b2, a1, a2;

};

Biquad lowpass(double fc, double fs, double q = 0.70710678118654752) {
  const double w0 = 2.0 * pi * fc / fs, cw = std::cos(w0), al = std::sin(w0) / (2 * q);
  const double a0 = 1 + al;
  return {(1 - cw) / 2 / a0, (1 - cw) / a0, (1 - cw) / 2 / a0, -2 * cw / a0, (1 - al) / a0};
}

Biquad highpass(double fc, double fs, double q = 0.70710678118654752) {
  const double w0 = 2.0 * pi * fc / fs, cw = std::cos(w0), al = std::sin(w0) / (2 * q);
  const double a0 = 1 + al;
  return {(1 + cw) / 2 / a0, -(1 + cw) / a0, (1 + cw) / 2 / a0, -2 * cw / a0, (1 - al) / a0};
}

Biquad notch(double f0, double fs, double q) {
  const double w0 = 2.0 * pi * f0 / fs, cw = std::cos(w0), al = std::sin(w0) / (2 * q);
  const double a0 = 1 + al;
  return {1 / a0, -2 * cw / a0, 1 / a0, -2 * cw / a0, (1 - al) / a0};
}

// Zero-phase application of the cascade: multiply the spectrum by the
// squared magnitude response (the exact forward-backward response with
// circular boundary handling, so no junction transients ring into the
// window). The Q=30 notch would otherwise ring for ~0.2 s from any pad seam.
void filtfilt(const std::vector<Biquad>& cascade, double* x, std::int64_t n) {
  std::vector<double> re(x, x + n), im(static_cast<std::size_t>(n), 0.0);
  fft::fft1d(re.data(), im.data(), n, false);
  for (std::int64_t k = 0; k < n; ++k) {
    const double w = 2.0 * pi * static_cast<double>(k) / static_cast<double>(n);
    double gain = 1.0;
    for (const auto& bq : cascade) {
      const double c1 = std::cos(w), s1 = std::sin(w);
      const double c2 = std::cos(2 * w), s2 = std::sin(2 * w);
      const double nr = bq.b0 + bq.b1 * c1 + bq.b2 * c2;
      const double ni = -(bq.b1 * s1 + bq.b2 * s2);
      const double dr = 1.0 + bq.a1 * c1 + bq.a2 * c2;
      const double di = -(bq.a1 * s1 + bq.a2 * s2);
      gain *= (nr * nr + ni * ni) / (dr * dr + di * di);
    }
    re[static_cast<std::size_t>(k)] *= gain;
    im[static_cast<std::size_t>(k)] *= gain;
  }
  fft::fft1d(re.data(), im.data(), n, true);
  std::copy_n(re.begin(), n, x);
}

void detrend(double* x, std::int64_t n) {
  // least-squares line fit
  const double tm = (static_cast<double>(n) - 1) / 2.0;
  double sy = 0, sty = 0, stt = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) - tm;
    sy += x[i];
    sty += t * x[i];
    stt += t * t;
  }
  const double mean = sy / static_cast<double>(n);
  const double slope = stt > 0 ? sty / stt : 0.0;
  for (std::int64_t i = 0; i < n; ++i)
    x[i] -= mean + slope * (static_cast<double>(i) - tm);
}

}  // namespace

EegEpoch preprocess(const EegEpoch& epoch) {
  epoch.validate();
  constexpr double kLowpassHz = 100.0;
  if (epoch.fs < 2.0 * kLowpassHz)
    throw std::invalid_argument("preprocess: sampling rate below twice the low-pass corner");
  EegEpoch out = epoch;
  const std::vector<Biquad> cascade = {
      highpass(0.1, epoch.fs),
      lowpass(kLowpassHz, epoch.fs),
      notch(50.0, epoch.fs, 30.0),
  };
  for (std::int64_t c = 0; c < out.n_channels(); ++c) {
    detrend(out.channel(c), out.n_samples);
    filtfilt(cascade, out.channel(c), out.n_samples);
  }
  return out;
}

LayoutConfig LayoutConfig::full() { return LayoutConfig{}; }

LayoutConfig LayoutConfig::toy() {
  LayoutConfig l;
  l.expected_channels = 8;
  l.rows_per_channel = 12;
  return l;
}

Tensor<double> bilinear_resize(const Tensor<double>& in, std::int64_t oh, std::int64_t ow) {
  const std::int64_t H = in.shape[0], W = in.shape[1];
  Tensor<double> out({oh, ow});
  auto coord = [](std::int64_t o, std::int64_t on, std::int64_t in_n) {
    double p = (static_cast<double>(o) + 0.5) * static_cast<double>(in_n) /
                   static_cast<double>(on) -
               0.5;
    return std::clamp(p, 0.0, static_cast<double>(in_n - 1));
  };
  for (std::int64_t r = 0; r < oh; ++r) {
    const double py = coord(r, oh, H);
    const auto y0 = static_cast<std::int64_t>(py);
    const std::int64_t y1 = std::min(y0 + 1, H - 1);
    const double wy = py - static_cast<double>(y0);
    for (std::int64_t c = 0; c < ow; ++c) {
      const double px = coord(c, ow, W);
      const auto x0 = static_cast<std::int64_t>(px);
      const std::int64_t x1 = std::min(x0 + 1, W - 1);
      const double wx = px - static_cast<double>(x0);
      out.at2(r, c) = (1 - wy) * ((1 - wx) * in.at2(y0, x0) + wx * in.at2(y0, x1)) +
                      wy * ((1 - wx) * in.at2(y1, x0) + wx * in.at2(y1, x1));
    }
  }
  return out;
}

namespace {

// Spectral-residual saliency of a 2-D map, min-max normalized to [0, 1].
// Constant maps (no structure) produce an all-zero saliency.
Tensor<double> spectral_residual(const Tensor<double>& plane) {
  double pmean = 0;
  for (double v : plane.data) pmean += v;
  pmean /= static_cast<double>(plane.numel());
  double pvar = 0;
  for (double v : plane.data) pvar += (v - pmean) * (v - pmean);
  if (pvar < 1e-18 * static_cast<double>(plane.numel()))
    return Tensor<double>(plane.shape);
  Tensor<double> centered = plane;
  for (auto& v : centered.data) v -= pmean;
  auto spec = fft::fft2(centered, /*pad_to_pow2=*/true);
  const std::int64_t H = spec.shape[0], W = spec.shape[1];
  Tensor<double> logamp({H, W}), phase_r({H, W}), phase_i({H, W});
  for (std::int64_t i = 0; i < H * W; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const double amp = std::hypot(spec.re[k], spec.im[k]);
    logamp.data[k] = std::log(amp + 1e-12);
    phase_r.data[k] = amp > 1e-12 ? spec.re[k] / amp : 1.0;
    phase_i.data[k] = amp > 1e-12 ? spec.im[k] / amp : 0.0;
  }
  // residual = log amplitude minus its 3x3 boxcar smoothing
  ComplexTensor<double> recomb({H, W});
  for (std::int64_t r = 0; r < H; ++r) {
    for (std::int64_t c = 0; c < W; ++c) {
      double avg = 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          avg += logamp.at2((r + dy + H) % H, (c + dx + W) % W);
      const double res = logamp.at2(r, c) - avg / 9.0;
      const double mag = std::exp(res);
      recomb.re[static_cast<std::size_t>(r * W + c)] = mag * phase_r.at2(r, c);
      recomb.im[static_cast<std::size_t>(r * W + c)] = mag * phase_i.at2(r, c);
    }
  }
  auto back = fft::ifft2(recomb);
  const std::int64_t oh = plane.shape[0], ow = plane.shape[1];
  Tensor<double> sal({oh, ow});
  for (std::int64_t r = 0; r < oh; ++r)
    for (std::int64_t c = 0; c < ow; ++c) {
      const auto k = static_cast<std::size_t>(r * W + c);
      sal.at2(r, c) = back.re[k] * back.re[k] + back.im[k] * back.im[k];
    }
  // light Gaussian smoothing (separable 5-tap)
  const double kern[5] = {0.0625, 0.25, 0.375, 0.25, 0.0625};
  Tensor<double> tmp({oh, ow});
  for (std::int64_t r = 0; r < oh; ++r)
    for (std::int64_t c = 0; c < ow; ++c) {
      double acc = 0;
      for (int d = -2; d <= 2; ++d)
        acc += kern[d + 2] * sal.at2(r, std::clamp<std::int64_t>(c + d, 0, ow - 1));
      tmp.at2(r, c) = acc;
    }
  for (std::int64_t r = 0; r < oh; ++r)
    for (std::int64_t c = 0; c < ow; ++c) {
      double acc = 0;
      for (int d = -2; d <= 2; ++d)
        acc += kern[d + 2] * tmp.at2(std::clamp<std::int64_t>(r + d, 0, oh - 1), c);
      sal.at2(r, c) = acc;
    }
  return sal;
}

// Scharr gradient magnitude.
Tensor<double> scharr_magnitude(const Tensor<double>& plane) {
  const std::int64_t H = plane.shape[0], W = plane.shape[1];
  Tensor<double> out({H, W});
  const double kx[3][3] = {{-3, 0, 3}, {-10, 0, 10}, {-3, 0, 3}};
  const double ky[3][3] = {{-3, -10, -3}, {0, 0, 0}, {3, 10, 3}};
  for (std::int64_t r = 0; r < H; ++r)
    for (std::int64_t c = 0; c < W; ++c) {
      double gx = 0, gy = 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const std::int64_t rr = std::clamp<std::int64_t>(r + dy, 0, H - 1);
          const std::int64_t cc = std::clamp<std::int64_t>(c + dx, 0, W - 1);
          gx += kx[dy + 1][dx + 1] * plane.at2(rr, cc);
          gy += ky[dy + 1][dx + 1] * plane.at2(rr, cc);
        }
      out.at2(r, c) = std::hypot(gx, gy);
    }
  return out;
}

void minmax_normalize(Tensor<double>& m) {
  double lo = m.data[0], hi = m.data[0];
  for (double v : m.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi - lo < 1e-12) {
    std::fill(m.data.begin(), m.data.end(), 0.0);
    return;
  }
  for (auto& v : m.data) v = (v - lo) / (hi - lo);
}

}  // namespace

MultispectralImage encode_multispectral(const EegEpoch& montaged, const LayoutConfig& layout) {
  montaged.validate();
  if (montaged.n_channels() != layout.expected_channels)
    throw std::invalid_argument(
        "encode_multispectral: epoch has " + std::to_string(montaged.n_channels()) +
        " channels but the layout expects " + std::to_string(layout.expected_channels));
  const std::int64_t H = layout.height(), W = layout.width;
  const std::int64_t T = montaged.n_samples;

  Tensor<double> fused({H, W});
  const wavelets::Mother mothers[3] = {wavelets::Mother::Dog, wavelets::Mother::Paul,
                                       wavelets::Mother::Morlet};
  for (std::int64_t c = 0; c < montaged.n_channels(); ++c) {
    std::vector<double> sig(montaged.channel(c), montaged.channel(c) + T);
    Tensor<double> ssum({layout.n_scales, T});
    for (const auto m : mothers) {
      auto scales = wavelets::cwt_scale_grid(m, montaged.fs, layout.n_scales,
                                             layout.fmin_hz, layout.fmax_hz);
      auto res = wavelets::cwt_1d(sig, m, scales);
      for (std::int64_t i = 0; i < ssum.numel(); ++i) {
        const auto k = static_cast<std::size_t>(i);
        const double p = res.coeffs.re[k] * res.coeffs.re[k] +
                         res.coeffs.im[k] * res.coeffs.im[k];
        ssum.data[k] += std::log(p + 1e-8);
      }
    }
    Tensor<double> block = bilinear_resize(ssum, layout.rows_per_channel, W);
    for (std::int64_t r = 0; r < layout.rows_per_channel; ++r)
      for (std::int64_t col = 0; col < W; ++col)
        fused.at2(c * layout.rows_per_channel + r, col) = block.at2(r, col);
  }

  // Remove the plane mean first: amplitude scaling of the input shifts every
  // log-power value by the same constant, so the centered plane is exactly
  // scale invariant. Blocks are then normalized to unit l2 norm.
  {
    double pmean = 0;
    for (double v : fused.data) pmean += v;
    pmean /= static_cast<double>(fused.numel());
    for (auto& v : fused.data) v -= pmean;
    for (std::int64_t c = 0; c < montaged.n_channels(); ++c) {
      double norm = 0;
      for (std::int64_t r = 0; r < layout.rows_per_channel; ++r)
        for (std::int64_t col = 0; col < W; ++col) {
          const double v = fused.at2(c * layout.rows_per_channel + r, col);
          norm += v * v;
        }
      norm = std::sqrt(norm);
      if (norm < 1e-12) continue;  // constant block stays zero
      for (std::int64_t r = 0; r < layout.rows_per_channel; ++r)
        for (std::int64_t col = 0; col < W; ++col)
          fused.at2(c * layout.rows_per_channel + r, col) /= norm;
    }
  }

  Tensor<double> sa1 = spectral_residual(fused);
  minmax_normalize(sa1);
  Tensor<double> sa2 = scharr_magnitude(fused);
  minmax_normalize(sa2);

  MultispectralImage img;
  img.label = montaged.label;
  img.subject_id = montaged.subject_id;
  img.block_rows = layout.rows_per_channel;
  img.pixels = Tensor<float>({3, H, W});
  for (std::int64_t i = 0; i < H * W; ++i) {
    const auto k = static_cast<std::size_t>(i);
    img.pixels.data[k] = static_cast<float>(fused.data[k]);
    img.pixels.data[static_cast<std::size_t>(H * W + i)] = static_cast<float>(sa1.data[k]);
    img.pixels.data[static_cast<std::size_t>(2 * H * W + i)] = static_cast<float>(sa2.data[k]);
  }
  return img;
}

MultispectralImage channel_reshuffle_with_perm(const MultispectralImage& img,
                                               const std::vector<std::size_t>& perm) {
  const std::int64_t H = img.pixels.shape[1], W = img.pixels.shape[2];
  if (H % img.block_rows != 0)
    throw std::invalid_argument("channel_reshuffle: height not divisible by the block size");
  const auto blocks = static_cast<std::size_t>(H / img.block_rows);
  if (perm.size() != blocks)
    throw std::invalid_argument("channel_reshuffle: permutation size mismatch");
  MultispectralImage out = img;
  for (std::size_t b = 0; b < blocks; ++b) {
    const auto src = perm[b];
    for (int plane = 0; plane < 3; ++plane) {
      const std::int64_t base_src =
          plane * H * W + static_cast<std::int64_t>(src) * img.block_rows * W;
      const std::int64_t base_dst =
          plane * H * W + static_cast<std::int64_t>(b) * img.block_rows * W;
      std::copy_n(img.pixels.data.begin() + base_src, img.block_rows * W,
                  out.pixels.data.begin() + base_dst);
    }
  }
  return out;
}

MultispectralImage channel_reshuffle(const MultispectralImage& img, Rng& rng) {
  const std::int64_t H = img.pixels.shape[1];
  return channel_reshuffle_with_perm(
      img, rng.permutation(static_cast<std::size_t>(H / img.block_rows)));
}

SoftLabeled mixup(const MultispectralImage& a, const MultispectralImage& b, double lambda) {
  if (!a.pixels.same_shape(b.pixels))
    throw std::invalid_argument("mixup: image shapes differ");
  if (lambda < 0.0 || lambda > 1.0)
    throw std::invalid_argument("mixup: lambda must lie in [0, 1]");
  SoftLabeled out;
  out.pixels = Tensor<float>(a.pixels.shape);
  const auto lf = static_cast<float>(lambda);
  for (std::size_t i = 0; i < out.pixels.data.size(); ++i)
    out.pixels.data[i] = lf * a.pixels.data[i] + (1.f - lf) * b.pixels.data[i];
  out.label = {0.f, 0.f};
  out.label[static_cast<std::size_t>(a.label)] += lf;
  out.label[static_cast<std::size_t>(b.label)] += 1.f - lf;
  return out;
}

}  // namespace sf::enc
