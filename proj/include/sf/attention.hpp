// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the scatterformer authors
#pragma once

#include "sf/autodiff.hpp"
#include "sf/wavelets.hpp"

namespace sf::attn {

struct AttentionConfig {
  int dim = 0;
  int heads = 1;
  double high_low_split = 0.5;  // fraction of channels routed to the high branch

  void validate() const {
    if (dim <= 0 || heads <= 0 || dim % (2 * heads) != 0)
      throw std::invalid_argument("AttentionConfig: dim must be divisible by 2*heads");
  }
};

// Cross-covariance attention over channel tokens. q, k, v are NCHW feature
// maps; queries/keys are l2-normalized per channel across tokens, the
// channels x channels score matrix is tempered by exp(log_tau) per head and
// softmaxed along the contracted axis. Cost is linear in the token count.
template <typename T>
ad::Var<T> xca(ad::Tape<T>& t, ad::Var<T> q, ad::Var<T> k, ad::Var<T> v,
               ad::Var<T> log_tau, int heads);

// Locally-enhanced positional term: depthwise 3x3 convolution of x, added
// residually by the caller.
template <typename T>
ad::Var<T> lepe(ad::Tape<T>& t, ad::Var<T> x, ad::Var<T> dw_kernel);

enum class QMode { Scatter, Lfu };

// Weight handles for one frequency-aware attention block. The Vars live in
// the model's parameter store; BnState objects live in its mutable state.
template <typename T>
struct FaaWeights {
  // high branch: scattering (or LFU) query projection, strided K/V
  ad::Var<T> q_proj_w;                       // pointwise: C/2*(1+L) -> C/2
  ad::Var<T> lfu_re, lfu_im, q_conv_w;       // LFU query path (QMode::Lfu)
  ad::Var<T> q_bn_g, q_bn_b;
  ad::Var<T> k_conv_w, k_bn_g, k_bn_b;
  ad::Var<T> v_conv_w, v_bn_g, v_bn_b;
  ad::Var<T> high_tau;
  // low branch: 3x3 token embedding producing q/k/v stacked
  ad::Var<T> low_conv_w, low_bn_g, low_bn_b;
  ad::Var<T> low_tau;
  // fusion + positional term
  ad::Var<T> fuse_w, fuse_b;
  ad::Var<T> lepe_w;

  ad::BnState<T>* q_bn = nullptr;
  ad::BnState<T>* k_bn = nullptr;
  ad::BnState<T>* v_bn = nullptr;
  ad::BnState<T>* low_bn = nullptr;
};

// Captured branch activations for the attention-spectrum analysis.
template <typename T>
struct FaaCapture {
  Tensor<T> high_upsampled;  // Upsample(X_h'), (N, C/2, H, W)
  Tensor<T> low;             // X_l', (N, C/2, H, W)
  Tensor<T> fused;           // block output (N, C, H, W)
};

// Dual-branch frequency-aware attention. Splits channels, runs the
// scattering-query XCA at half resolution and the convolutional-token XCA at
// full resolution, fuses with a linear projection and adds the depthwise
// positional term. Shape preserving; requires even H, W.
template <typename T>
ad::Var<T> faa(ad::Tape<T>& t, ad::Var<T> x, const FaaWeights<T>& w,
               const wavelets::FilterBank<T>& bank, int heads, QMode qmode, bool train,
               FaaCapture<T>* capture = nullptr);

}  // namespace sf::attn
