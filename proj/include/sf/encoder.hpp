// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the scatterformer authors
#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "sf/rng.hpp"
#include "sf/tensor.hpp"

namespace sf::enc {

// Multichannel raw signal window. Samples are stored channel-major
// (channel c occupies samples [c*T, (c+1)*T)), matching the file payload.
struct EegEpoch {
  std::vector<double> samples;
  std::int64_t n_samples = 0;  // T per channel
  double fs = 250.0;
  std::string subject_id;
  int label = 0;
  std::vector<std::string> channel_names;

  std::int64_t n_channels() const { return static_cast<std::int64_t>(channel_names.size()); }
  double* channel(std::int64_t c) { return samples.data() + c * n_samples; }
  const double* channel(std::int64_t c) const { return samples.data() + c * n_samples; }
  void validate() const;
};

// Epoch file format: one JSON header line
// {"fs":250,"channels":[...],"samples":T,"subject":"s01","label":0}
// followed by the little-endian f32 payload, channel-major.
void save_epoch(const std::string& path, const EegEpoch& epoch);
EegEpoch load_epoch(const std::string& path);

struct MontageSpec {
  std::vector<std::pair<std::string, std::string>> pairs;  // (anode, cathode)
  static MontageSpec double_banana24();
  // First eight pairs of the double banana; the desk-scale layout.
  static MontageSpec toy8();
};

// Bipolar re-reference: output channel k = anode_k - cathode_k.
EegEpoch apply_montage(const EegEpoch& epoch, const MontageSpec& spec);

// Zero-phase cascade (forward-backward): linear detrend, then 0.1 Hz
// high-pass, 100 Hz low-pass and a 50 Hz notch (Q=30), all second-order
// sections. Rejects sampling rates below twice the low-pass corner.
EegEpoch preprocess(const EegEpoch& epoch);

struct LayoutConfig {
  int expected_channels = 24;
  int rows_per_channel = 32;
  int width = 256;
  int n_scales = 32;
  double fmin_hz = 0.5, fmax_hz = 70.0;

  std::int64_t height() const {
    return static_cast<std::int64_t>(expected_channels) * rows_per_channel;
  }
  static LayoutConfig full();  // 24 x 32 = 768 rows
  static LayoutConfig toy();   // 8 x 12 = 96 rows
};

struct MultispectralImage {
  Tensor<float> pixels;  // (3, H, W): fused log power, SA1, SA2
  int label = 0;
  std::string subject_id;
  int block_rows = 32;  // rows per channel block (for reshuffling)
};

// Saliency-aware multispectral encoding: per channel, the DoG/Paul/Morlet
// log-power spectra are summed, resized to a rows x width block and
// l2-normalized; blocks stack vertically (row 0 of each block is the lowest
// frequency). SA1 is the spectral-residual saliency of the fused plane, SA2
// its Scharr gradient magnitude, both min-max normalized.
MultispectralImage encode_multispectral(const EegEpoch& montaged,
                                        const LayoutConfig& layout = LayoutConfig::full());

// Permutes the per-channel row blocks of all three planes identically.
MultispectralImage channel_reshuffle(const MultispectralImage& img, Rng& rng);
MultispectralImage channel_reshuffle_with_perm(const MultispectralImage& img,
                                               const std::vector<std::size_t>& perm);

struct SoftLabeled {
  Tensor<float> pixels;
  std::array<float, 2> label{0.f, 0.f};
};

// lambda * a + (1 - lambda) * b for pixels and one-hot labels.
SoftLabeled mixup(const MultispectralImage& a, const MultispectralImage& b, double lambda);

// Shared helper: align_corners=false bilinear resample of a 2-D map.
Tensor<double> bilinear_resize(const Tensor<double>& in, std::int64_t oh, std::int64_t ow);

}  // namespace sf::enc
