// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the scatterformer authors
#pragma once

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "sf/attention.hpp"
#include "sf/autodiff.hpp"
#include "sf/wavelets.hpp"

namespace sf::model {

enum class Variant { Proto, ConvScat1, ConvScat2, ScatterFormer, FourierFormer };

Variant variant_from_string(const std::string& name);
std::string variant_name(Variant v);

// Four-stage hierarchical configuration. The toy scale keeps every variant
// under the 1.5M-parameter budget; the paper scale is expressible but not
// exercised by the test suite.
struct ModelConfig {
  Variant variant = Variant::ScatterFormer;
  std::array<int, 4> stage_dims{32, 64, 96, 160};
  std::array<int, 4> stage_depths{1, 1, 2, 1};
  std::array<int, 4> heads{2, 2, 4, 4};
  std::int64_t in_channels = 3, in_h = 96, in_w = 256;
  int num_classes = 2;
  std::string scale = "toy";
  double mlp_ratio = 4.0;
  bool use_swish = false;  // Mish by default
  int stem_J = 2, stem_L = 4, stem_order = 2;
  int merge_J = 1, merge_L = 4;
  int faa_J = 1, faa_L = 4;

  static ModelConfig preset(Variant v, const std::string& scale);
  void validate() const;
};

template <typename T>
struct ParamStore {
  // Ordered by name, so enumeration (checkpoints, optimizer state) is
  // deterministic. Initialization draws a per-name stream, so values do not
  // depend on creation order either.
  std::map<std::string, ad::Var<T>> params;
  std::map<std::string, ad::BnState<T>> bn;

  std::int64_t count() const {
    std::int64_t n = 0;
    for (const auto& [k, v] : params) n += v->val.numel();
    return n;
  }
  void zero_grad() {
    for (auto& [k, v] : params) v->grad = Tensor<T>();
  }
};

// Captured activations for the interpretability tooling.
template <typename T>
struct ForwardCapture {
  int stage = 0;  // 1-based stage index to capture (last block of the stage)
  bool has_faa = false;
  attn::FaaCapture<T> faa;
  Tensor<T> stage_output;
};

template <typename T>
class Model {
 public:
  Model(const ModelConfig& cfg, std::uint64_t seed);

  // batch: (N, C, H, W) matching the config. Returns logits (N, classes).
  ad::Var<T> forward(ad::Tape<T>& tape, const Tensor<T>& batch, bool train,
                     ForwardCapture<T>* capture = nullptr);

  const ModelConfig& config() const { return cfg_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }
  bool has_faa() const { return cfg_.variant != Variant::Proto; }
  // Count of scattering filter banks wired into the forward graph.
  int scattering_bank_count() const { return static_cast<int>(banks_.size()); }

 private:
  struct Stage;
  ModelConfig cfg_;
  ParamStore<T> params_;
  std::map<std::string, std::shared_ptr<wavelets::FilterBank<T>>> banks_;

  const wavelets::FilterBank<T>& bank_for(const std::string& key, int J, int L,
                                          std::int64_t h, std::int64_t w);
  ad::Var<T> param(const std::string& name);
  ad::Var<T> block_forward(ad::Tape<T>& tape, ad::Var<T> x, int stage, int block,
                           bool train, attn::FaaCapture<T>* cap);
  ad::Var<T> act(ad::Tape<T>& tape, ad::Var<T> x);
};

// Checkpoints: manifest.json plus one blob per parameter (and per batch-norm
// running-statistics pair). Loading restores bit-identical values and fails
// naming the first parameter whose blob is missing or mismatched.
template <typename T>
void checkpoint_save(const Model<T>& model, const std::string& dir);
template <typename T>
void checkpoint_load(Model<T>& model, const std::string& dir);

}  // namespace sf::model
