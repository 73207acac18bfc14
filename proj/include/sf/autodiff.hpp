// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the scatterformer authors
#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "sf/tensor.hpp"
#include "sf/wavelets.hpp"

// Minimal reverse-mode autodiff. Ops run on batched tensors (NCHW unless
// noted) and record themselves on a Tape in creation order, which is the
// topological order backward() walks in reverse. Ops executed against a
// non-recording tape just compute values. Gradients accumulate, so leaves
// feeding several consumers work without extra bookkeeping; parameters that
// never join the graph simply keep an empty gradient (read as zeros).

namespace sf::ad {

template <typename T>
struct Node {
  Tensor<T> val;
  Tensor<T> grad;  // allocated lazily on first touch
  bool requires_grad = false;
  std::string name;
  std::vector<std::shared_ptr<Node<T>>> parents;
  std::function<void(Node<T>&)> backward_fn;

  void ensure_grad() {
    if (grad.data.empty()) grad = Tensor<T>(val.shape);
  }
  bool has_grad() const { return !grad.data.empty(); }
};

template <typename T>
using Var = std::shared_ptr<Node<T>>;

template <typename T>
Var<T> leaf(Tensor<T> val, bool requires_grad = false, std::string name = "") {
  auto n = std::make_shared<Node<T>>();
  n->val = std::move(val);
  n->requires_grad = requires_grad;
  n->name = std::move(name);
  return n;
}

template <typename T>
class Tape {
 public:
  bool recording = true;
  std::vector<Var<T>> nodes;

  Var<T> record(Tensor<T> val, std::vector<Var<T>> parents,
                std::function<void(Node<T>&)> bwd, const char* opname) {
    auto n = std::make_shared<Node<T>>();
    n->val = std::move(val);
    n->name = opname;
    if (recording) {
      bool needs = false;
      for (const auto& p : parents) needs |= p->requires_grad;
      if (needs) {
        n->requires_grad = true;
        n->parents = std::move(parents);
        n->backward_fn = std::move(bwd);
      }
      nodes.push_back(n);
    }
    return n;
  }

  void clear() { nodes.clear(); }
};

// Runs reverse-mode accumulation from a scalar loss.
template <typename T>
void backward(Tape<T>& tape, const Var<T>& loss);

// Throws if the value contains NaN or Inf; label names the layer.
template <typename T>
void check_finite(const Var<T>& v, const std::string& label);

// ---- elementwise / shape ----
template <typename T> Var<T> add(Tape<T>& t, Var<T> a, Var<T> b);
template <typename T> Var<T> sub(Tape<T>& t, Var<T> a, Var<T> b);
template <typename T> Var<T> mul(Tape<T>& t, Var<T> a, Var<T> b);
template <typename T> Var<T> scale(Tape<T>& t, Var<T> a, T s);
template <typename T> Var<T> log_op(Tape<T>& t, Var<T> a);
template <typename T> Var<T> mish(Tape<T>& t, Var<T> a);
template <typename T> Var<T> swish(Tape<T>& t, Var<T> a);
template <typename T> Var<T> modulus_pair(Tape<T>& t, Var<T> re, Var<T> im);
template <typename T> Var<T> concat_channels(Tape<T>& t, const std::vector<Var<T>>& xs);
template <typename T> Var<T> slice_channels(Tape<T>& t, Var<T> x, std::int64_t c0, std::int64_t c1);
template <typename T> Var<T> pad_hw(Tape<T>& t, Var<T> x, int top, int bottom, int left, int right);
template <typename T> Var<T> crop_hw(Tape<T>& t, Var<T> x, int top, int left, std::int64_t h, std::int64_t w);

// ---- neural-net primitives ----
template <typename T>
Var<T> conv2d(Tape<T>& t, Var<T> x, Var<T> w, Var<T> bias, int stride_y, int stride_x,
              int pad_y, int pad_x, int groups = 1);

template <typename T>
struct BnState {
  Tensor<T> running_mean, running_var;
  std::int64_t batches_seen = 0;
};

template <typename T>
Var<T> batch_norm(Tape<T>& t, Var<T> x, Var<T> gamma, Var<T> beta, BnState<T>& state,
                  bool train, T momentum = T(0.1), T eps = T(1e-5));

template <typename T> Var<T> bilinear_upsample2(Tape<T>& t, Var<T> x);
template <typename T> Var<T> global_avg_pool(Tape<T>& t, Var<T> x);            // NCHW -> (N,C)
template <typename T> Var<T> linear(Tape<T>& t, Var<T> x, Var<T> w, Var<T> b); // (N,Ci)x(Co,Ci)
template <typename T> Var<T> softmax_rows(Tape<T>& t, Var<T> x);               // (R,C) rows
template <typename T> Var<T> cross_entropy_soft(Tape<T>& t, Var<T> logits, const Tensor<T>& soft_labels);
template <typename T> Var<T> sum_all(Tape<T>& t, Var<T> x);
template <typename T> Var<T> sumsq_all(Tape<T>& t, Var<T> x);

// ---- token-attention pieces (3-D tensors (G, rows, cols)) ----
template <typename T> Var<T> l2norm_rows(Tape<T>& t, Var<T> x, T eps = T(1e-6));
template <typename T> Var<T> bmm_nt(Tape<T>& t, Var<T> a, Var<T> b);   // (G,R,T)x(G,C,T)->(G,R,C)
template <typename T> Var<T> bmm_nn(Tape<T>& t, Var<T> s, Var<T> v);   // (G,R,C)x(G,C,T)->(G,R,T)
template <typename T> Var<T> softmax_lastdim(Tape<T>& t, Var<T> x);
template <typename T> Var<T> div_by_exp(Tape<T>& t, Var<T> x, Var<T> log_tau, int heads);
// NCHW -> (N*heads, C/heads, H*W) and back
template <typename T> Var<T> to_heads(Tape<T>& t, Var<T> x, int heads);
template <typename T> Var<T> from_heads(Tape<T>& t, Var<T> x, int heads, std::int64_t H, std::int64_t W);

// ---- frequency-domain ops (implemented with the scattering machinery) ----
// Per-channel scattering embedding: pads (H, W) up to the bank grid,
// concatenates the order-0..order coefficient maps of every input channel
// along the channel axis, downsampled by 2^bank.J. Differentiable in x;
// the filters are fixed.
template <typename T>
Var<T> scatter_embed(Tape<T>& t, Var<T> x, const wavelets::FilterBank<T>& bank, int order);

// Channel count produced per input channel for a given bank/order.
int scatter_embed_maps(int J, int L, int order);

// Local Fourier unit: per-channel FFT, learnable pointwise complex channel
// mixing, inverse FFT, real part. Shape preserving.
template <typename T>
Var<T> lfu(Tape<T>& t, Var<T> x, Var<T> w_re, Var<T> w_im);

}  // namespace sf::ad
