// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the scatterformer authors
#include "sf/autodiff.hpp"

#include <cmath>
#include <stdexcept>

#include "sf/kernels.hpp"
#include "sf/parallel.hpp"

namespace sf::ad {

template <typename T>
void backward(Tape<T>& tape, const Var<T>& loss) {
  if (loss->val.numel() != 1)
    throw std::invalid_argument("backward: loss must be a scalar");
  loss->ensure_grad();
  loss->grad.data[0] = T(1);
  for (auto it = tape.nodes.rbegin(); it != tape.nodes.rend(); ++it) {
    Node<T>& n = **it;
    if (!n.backward_fn || !n.has_grad()) continue;
    n.backward_fn(n);
  }
}

template <typename T>
void check_finite(const Var<T>& v, const std::string& label) {
  for (const T x : v->val.data)
    if (!std::isfinite(static_cast<double>(x)))
      throw std::runtime_error("non-finite activation in " + label);
}

namespace {

template <typename T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (!a->val.same_shape(b->val))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_str(a->val.shape) + " vs " + shape_str(b->val.shape));
}

template <typename T>
void accum(Node<T>& dst, const Tensor<T>& g) {
  dst.ensure_grad();
  kernels::vadd(dst.grad.ptr(), g.ptr(), dst.grad.ptr(), g.data.size());
}

}  // namespace

// ---- elementwise -----------------------------------------------------------

template <typename T>
Var<T> add(Tape<T>& t, Var<T> a, Var<T> b) {
  require_same_shape(a, b, "add");
  Tensor<T> y(a->val.shape);
  kernels::vadd(a->val.ptr(), b->val.ptr(), y.ptr(), y.data.size());
  return t.record(std::move(y), {a, b},
                  [a, b](Node<T>& n) {
                    if (a->requires_grad) accum(*a, n.grad);
                    if (b->requires_grad) accum(*b, n.grad);
                  },
                  "add");
}

template <typename T>
Var<T> sub(Tape<T>& t, Var<T> a, Var<T> b) {
  require_same_shape(a, b, "sub");
  Tensor<T> y(a->val.shape);
  kernels::vsub(a->val.ptr(), b->val.ptr(), y.ptr(), y.data.size());
  return t.record(std::move(y), {a, b},
                  [a, b](Node<T>& n) {
                    if (a->requires_grad) accum(*a, n.grad);
                    if (b->requires_grad) {
                      b->ensure_grad();
                      kernels::axpy(T(-1), n.grad.ptr(), b->grad.ptr(), n.grad.data.size());
                    }
                  },
                  "sub");
}

template <typename T>
Var<T> mul(Tape<T>& t, Var<T> a, Var<T> b) {
  require_same_shape(a, b, "mul");
  Tensor<T> y(a->val.shape);
  kernels::vmul(a->val.ptr(), b->val.ptr(), y.ptr(), y.data.size());
  return t.record(std::move(y), {a, b},
                  [a, b](Node<T>& n) {
                    const std::size_t m = n.grad.data.size();
                    Tensor<T> tmp(n.grad.shape);
                    if (a->requires_grad) {
                      a->ensure_grad();
                      kernels::vmul(n.grad.ptr(), b->val.ptr(), tmp.ptr(), m);
                      kernels::vadd(a->grad.ptr(), tmp.ptr(), a->grad.ptr(), m);
                    }
                    if (b->requires_grad) {
                      b->ensure_grad();
                      kernels::vmul(n.grad.ptr(), a->val.ptr(), tmp.ptr(), m);
                      kernels::vadd(b->grad.ptr(), tmp.ptr(), b->grad.ptr(), m);
                    }
                  },
                  "mul");
}

template <typename T>
Var<T> scale(Tape<T>& t, Var<T> a, T s) {
  Tensor<T> y = a->val;
  kernels::scale(s, y.ptr(), y.data.size());
  return t.record(std::move(y), {a},
                  [a, s](Node<T>& n) {
                    a->ensure_grad();
                    kernels::axpy(s, n.grad.ptr(), a->grad.ptr(), n.grad.data.size());
                  },
                  "scale");
}

template <typename T>
Var<T> log_op(Tape<T>& t, Var<T> a) {
  Tensor<T> y(a->val.shape);
  for (std::int64_t i = 0; i < y.numel(); ++i) {
    const T v = a->val.data[static_cast<std::size_t>(i)];
    if (v <= T(0)) throw std::invalid_argument("log: nonpositive input");
    y.data[static_cast<std::size_t>(i)] = std::log(v);
  }
  return t.record(std::move(y), {a},
                  [a](Node<T>& n) {
                    a->ensure_grad();
                    for (std::int64_t i = 0; i < n.grad.numel(); ++i)
                      a->grad.data[static_cast<std::size_t>(i)] +=
                          n.grad.data[static_cast<std::size_t>(i)] /
                          a->val.data[static_cast<std::size_t>(i)];
                  },
                  "log");
}

namespace {
template <typename T>
T softplus(T x) {
  if (x > T(20)) return x;
  if (x < T(-20)) return std::exp(x);
  return std::log1p(std::exp(x));
}
template <typename T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}
}  // namespace

template <typename T>
Var<T> mish(Tape<T>& t, Var<T> a) {
  Tensor<T> y(a->val.shape);
  for (std::int64_t i = 0; i < y.numel(); ++i) {
    const T x = a->val.data[static_cast<std::size_t>(i)];
    y.data[static_cast<std::size_t>(i)] = x * std::tanh(softplus(x));
  }
  return t.record(std::move(y), {a},
                  [a](Node<T>& n) {
                    a->ensure_grad();
                    for (std::int64_t i = 0; i < n.grad.numel(); ++i) {
                      const T x = a->val.data[static_cast<std::size_t>(i)];
                      const T th = std::tanh(softplus(x));
                      const T d = th + x * (T(1) - th * th) * sigmoid(x);
                      a->grad.data[static_cast<std::size_t>(i)] +=
                          n.grad.data[static_cast<std::size_t>(i)] * d;
                    }
                  },
                  "mish");
}

template <typename T>
Var<T> swish(Tape<T>& t, Var<T> a) {
  Tensor<T> y(a->val.shape);
  for (std::int64_t i = 0; i < y.numel(); ++i) {
    const T x = a->val.data[static_cast<std::size_t>(i)];
    y.data[static_cast<std::size_t>(i)] = x * sigmoid(x);
  }
  return t.record(std::move(y), {a},
                  [a](Node<T>& n) {
                    a->ensure_grad();
                    for (std::int64_t i = 0; i < n.grad.numel(); ++i) {
                      const T x = a->val.data[static_cast<std::size_t>(i)];
                      const T s = sigmoid(x);
                      a->grad.data[static_cast<std::size_t>(i)] +=
                          n.grad.data[static_cast<std::size_t>(i)] * (s + x * s * (T(1) - s));
                    }
                  },
                  "swish");
}

template <typename T>
Var<T> modulus_pair(Tape<T>& t, Var<T> re, Var<T> im) {
  require_same_shape(re, im, "modulus");
  Tensor<T> y(re->val.shape);
  kernels::cmodulus(re->val.ptr(), im->val.ptr(), y.ptr(), y.data.size());
  return t.record(std::move(y), {re, im},
                  [re, im](Node<T>& n) {
                    re->ensure_grad();
                    im->ensure_grad();
                    for (std::int64_t i = 0; i < n.grad.numel(); ++i) {
                      const auto k = static_cast<std::size_t>(i);
                      const T r = n.val.data[k];
                      if (r == T(0)) continue;  // subgradient 0 at the origin
                      re->grad.data[k] += n.grad.data[k] * re->val.data[k] / r;
                      im->grad.data[k] += n.grad.data[k] * im->val.data[k] / r;
                    }
                  },
                  "modulus");
}

// ---- shape ops --------------------------------------------------------------

template <typename T>
Var<T> concat_channels(Tape<T>& t, const std::vector<Var<T>>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_channels: empty list");
  const auto& s0 = xs[0]->val.shape;
  std::int64_t ctotal = 0;
  for (const auto& x : xs) {
    if (x->val.rank() != 4 || x->val.shape[0] != s0[0] || x->val.shape[2] != s0[2] ||
        x->val.shape[3] != s0[3])
      throw std::invalid_argument("concat_channels: incompatible shapes");
    ctotal += x->val.shape[1];
  }
  const std::int64_t N = s0[0], H = s0[2], W = s0[3], HW = H * W;
  Tensor<T> y({N, ctotal, H, W});
  for (std::int64_t n = 0; n < N; ++n) {
    std::int64_t co = 0;
    for (const auto& x : xs) {
      const std::int64_t c = x->val.shape[1];
      std::copy_n(x->val.ptr() + n * c * HW, c * HW, y.ptr() + (n * ctotal + co) * HW);
      co += c;
    }
  }
  std::vector<Var<T>> parents(xs.begin(), xs.end());
  return t.record(std::move(y), std::move(parents),
                  [xs, N, ctotal, HW](Node<T>& n) {
                    for (std::int64_t b = 0; b < N; ++b) {
                      std::int64_t co = 0;
                      for (const auto& x : xs) {
                        const std::int64_t c = x->val.shape[1];
                        if (x->requires_grad) {
                          x->ensure_grad();
                          kernels::vadd(x->grad.ptr() + b * c * HW,
                                        n.grad.ptr() + (b * ctotal + co) * HW,
                                        x->grad.ptr() + b * c * HW,
                                        static_cast<std::size_t>(c * HW));
                        }
                        co += c;
                      }
                    }
                  },
                  "concat_channels");
}

template <typename T>
Var<T> slice_channels(Tape<T>& t, Var<T> x, std::int64_t c0, std::int64_t c1) {
  if (x->val.rank() != 4 || c0 < 0 || c1 > x->val.shape[1] || c0 >= c1)
    throw std::invalid_argument("slice_channels: bad range");
  const std::int64_t N = x->val.shape[0], C = x->val.shape[1];
  const std::int64_t HW = x->val.shape[2] * x->val.shape[3];
  Tensor<T> y({N, c1 - c0, x->val.shape[2], x->val.shape[3]});
  for (std::int64_t n = 0; n < N; ++n)
    std::copy_n(x->val.ptr() + (n * C + c0) * HW, (c1 - c0) * HW,
                y.ptr() + n * (c1 - c0) * HW);
  return t.record(std::move(y), {x},
                  [x, c0, c1, N, C, HW](Node<T>& n) {
                    x->ensure_grad();
                    for (std::int64_t b = 0; b < N; ++b)
                      kernels::vadd(x->grad.ptr() + (b * C + c0) * HW,
                                    n.grad.ptr() + b * (c1 - c0) * HW,
                                    x->grad.ptr() + (b * C + c0) * HW,
                                    static_cast<std::size_t>((c1 - c0) * HW));
                  },
                  "slice_channels");
}

template <typename T>
Var<T> pad_hw(Tape<T>& t, Var<T> x, int top, int bottom, int left, int right) {
  const std::int64_t N = x->val.shape[0], C = x->val.shape[1];
  const std::int64_t H = x->val.shape[2], W = x->val.shape[3];
  const std::int64_t OH = H + top + bottom, OW = W + left + right;
  Tensor<T> y({N, C, OH, OW});
  for (std::int64_t nc = 0; nc < N * C; ++nc)
    for (std::int64_t r = 0; r < H; ++r)
      std::copy_n(x->val.ptr() + (nc * H + r) * W, W,
                  y.ptr() + (nc * OH + r + top) * OW + left);
  return t.record(std::move(y), {x},
                  [x, top, left, N, C, H, W, OH, OW](Node<T>& n) {
                    x->ensure_grad();
                    for (std::int64_t nc = 0; nc < N * C; ++nc)
                      for (std::int64_t r = 0; r < H; ++r)
                        kernels::vadd(x->grad.ptr() + (nc * H + r) * W,
                                      n.grad.ptr() + (nc * OH + r + top) * OW + left,
                                      x->grad.ptr() + (nc * H + r) * W,
                                      static_cast<std::size_t>(W));
                  },
                  "pad_hw");
}

template <typename T>
Var<T> crop_hw(Tape<T>& t, Var<T> x, int top, int left, std::int64_t h, std::int64_t w) {
  const std::int64_t N = x->val.shape[0], C = x->val.shape[1];
  const std::int64_t H = x->val.shape[2], W = x->val.shape[3];
  if (top + h > H || left + w > W) throw std::invalid_argument("crop_hw: out of range");
  Tensor<T> y({N, C, h, w});
  for (std::int64_t nc = 0; nc < N * C; ++nc)
    for (std::int64_t r = 0; r < h; ++r)
      std::copy_n(x->val.ptr() + (nc * H + r + top) * W + left, w,
                  y.ptr() + (nc * h + r) * w);
  return t.record(std::move(y), {x},
                  [x, top, left, h, w, N, C, H, W](Node<T>& n) {
                    x->ensure_grad();
                    for (std::int64_t nc = 0; nc < N * C; ++nc)
                      for (std::int64_t r = 0; r < h; ++r)
                        kernels::vadd(x->grad.ptr() + (nc * H + r + top) * W + left,
                                      n.grad.ptr() + (nc * h + r) * w,
                                      x->grad.ptr() + (nc * H + r + top) * W + left,
                                      static_cast<std::size_t>(w));
                  },
                  "crop_hw");
}

// ---- convolution ------------------------------------------------------------

template <typename T>
Var<T> conv2d(Tape<T>& t, Var<T> x, Var<T> w, Var<T> bias, int stride_y, int stride_x,
              int pad_y, int pad_x, int groups) {
  if (x->val.rank() != 4 || w->val.rank() != 4)
    throw std::invalid_argument("conv2d: expects NCHW input and OIHW weights");
  const std::int64_t N = x->val.shape[0], C = x->val.shape[1];
  const std::int64_t H = x->val.shape[2], W = x->val.shape[3];
  const std::int64_t CO = w->val.shape[0], CIG = w->val.shape[1];
  const std::int64_t KH = w->val.shape[2], KW = w->val.shape[3];
  if (C % groups != 0 || CO % groups != 0 || CIG != C / groups)
    throw std::invalid_argument("conv2d: channel/group mismatch");
  if (KH > H + 2 * pad_y || KW > W + 2 * pad_x)
    throw std::invalid_argument("conv2d: kernel larger than padded input");
  const std::int64_t OH = (H + 2 * pad_y - KH) / stride_y + 1;
  const std::int64_t OW = (W + 2 * pad_x - KW) / stride_x + 1;
  const std::int64_t co_per_g = CO / groups;

  Tensor<T> y({N, CO, OH, OW});
  auto forward_one = [&](std::int64_t n, std::int64_t co, T* out) {
    const std::int64_t g = co / co_per_g;
    for (std::int64_t ci = 0; ci < CIG; ++ci) {
      const T* xin = x->val.ptr() + ((n * C + g * CIG + ci) * H) * W;
      const T* wk = w->val.ptr() + ((co * CIG + ci) * KH) * KW;
      for (std::int64_t ky = 0; ky < KH; ++ky) {
        for (std::int64_t kx = 0; kx < KW; ++kx) {
          const T wv = wk[ky * KW + kx];
          if (wv == T(0)) continue;
          for (std::int64_t oy = 0; oy < OH; ++oy) {
            const std::int64_t iy = oy * stride_y + ky - pad_y;
            if (iy < 0 || iy >= H) continue;
            T* orow = out + oy * OW;
            const T* irow = xin + iy * W;
            if (stride_x == 1) {
              const std::int64_t ox0 = std::max<std::int64_t>(0, pad_x - kx);
              const std::int64_t ox1 = std::min<std::int64_t>(OW, W + pad_x - kx);
              if (ox1 > ox0)
                kernels::axpy(wv, irow + ox0 + kx - pad_x, orow + ox0,
                              static_cast<std::size_t>(ox1 - ox0));
            } else {
              for (std::int64_t ox = 0; ox < OW; ++ox) {
                const std::int64_t ix = ox * stride_x + kx - pad_x;
                if (ix >= 0 && ix < W) orow[ox] += wv * irow[ix];
              }
            }
          }
        }
      }
    }
    if (bias) {
      const T bv = bias->val.data[static_cast<std::size_t>(co)];
      for (std::int64_t i = 0; i < OH * OW; ++i) out[i] += bv;
    }
  };
  parallel_for(static_cast<std::size_t>(N * CO), [&](std::size_t idx) {
    const std::int64_t n = static_cast<std::int64_t>(idx) / CO;
    const std::int64_t co = static_cast<std::int64_t>(idx) % CO;
    forward_one(n, co, y.ptr() + (n * CO + co) * OH * OW);
  });

  std::vector<Var<T>> parents = bias ? std::vector<Var<T>>{x, w, bias}
                                     : std::vector<Var<T>>{x, w};
  auto bwd = [x, w, bias, N, C, H, W, CO, CIG, KH, KW, OH, OW, stride_y, stride_x,
              pad_y, pad_x, co_per_g](Node<T>& n) {
    const Tensor<T>& g = n.grad;
    if (x->requires_grad) {
      x->ensure_grad();
      parallel_for(static_cast<std::size_t>(N), [&](std::size_t nb) {
        for (std::int64_t co = 0; co < CO; ++co) {
          const std::int64_t grp = co / co_per_g;
          const T* grow0 = g.ptr() + (static_cast<std::int64_t>(nb) * CO + co) * OH * OW;
          for (std::int64_t ci = 0; ci < CIG; ++ci) {
            T* xg = x->grad.ptr() +
                    ((static_cast<std::int64_t>(nb) * C + grp * CIG + ci) * H) * W;
            const T* wk = w->val.ptr() + ((co * CIG + ci) * KH) * KW;
            for (std::int64_t ky = 0; ky < KH; ++ky)
              for (std::int64_t kx = 0; kx < KW; ++kx) {
                const T wv = wk[ky * KW + kx];
                if (wv == T(0)) continue;
                for (std::int64_t oy = 0; oy < OH; ++oy) {
                  const std::int64_t iy = oy * stride_y + ky - pad_y;
                  if (iy < 0 || iy >= H) continue;
                  const T* grow = grow0 + oy * OW;
                  T* xrow = xg + iy * W;
                  if (stride_x == 1) {
                    const std::int64_t ox0 = std::max<std::int64_t>(0, pad_x - kx);
                    const std::int64_t ox1 = std::min<std::int64_t>(OW, W + pad_x - kx);
                    if (ox1 > ox0)
                      kernels::axpy(wv, grow + ox0, xrow + ox0 + kx - pad_x,
                                    static_cast<std::size_t>(ox1 - ox0));
                  } else {
                    for (std::int64_t ox = 0; ox < OW; ++ox) {
                      const std::int64_t ix = ox * stride_x + kx - pad_x;
                      if (ix >= 0 && ix < W) xrow[ix] += wv * grow[ox];
                    }
                  }
                }
              }
          }
        }
      });
    }
    if (w->requires_grad) {
      w->ensure_grad();
      parallel_for(static_cast<std::size_t>(CO), [&](std::size_t co_s) {
        const std::int64_t co = static_cast<std::int64_t>(co_s);
        const std::int64_t grp = co / co_per_g;
        for (std::int64_t ci = 0; ci < CIG; ++ci) {
          T* wg = w->grad.ptr() + ((co * CIG + ci) * KH) * KW;
          for (std::int64_t nb = 0; nb < N; ++nb) {
            const T* xin = x->val.ptr() + ((nb * C + grp * CIG + ci) * H) * W;
            const T* grow0 = g.ptr() + (nb * CO + co) * OH * OW;
            for (std::int64_t ky = 0; ky < KH; ++ky)
              for (std::int64_t kx = 0; kx < KW; ++kx) {
                T acc = T(0);
                for (std::int64_t oy = 0; oy < OH; ++oy) {
                  const std::int64_t iy = oy * stride_y + ky - pad_y;
                  if (iy < 0 || iy >= H) continue;
                  const T* grow = grow0 + oy * OW;
                  const T* xrow = xin + iy * W;
                  if (stride_x == 1) {
                    const std::int64_t ox0 = std::max<std::int64_t>(0, pad_x - kx);
                    const std::int64_t ox1 = std::min<std::int64_t>(OW, W + pad_x - kx);
                    if (ox1 > ox0)
                      acc += kernels::dot(grow + ox0, xrow + ox0 + kx - pad_x,
                                          static_cast<std::size_t>(ox1 - ox0));
                  } else {
                    for (std::int64_t ox = 0; ox < OW; ++ox) {
                      const std::int64_t ix = ox * stride_x + kx - pad_x;
                      if (ix >= 0 && ix < W) acc += grow[ox] * xrow[ix];
                    }
                  }
                }
                wg[ky * KW + kx] += acc;
              }
          }
        }
      });
    }
    if (bias && bias->requires_grad) {
      bias->ensure_grad();
      for (std::int64_t co = 0; co < CO; ++co) {
        T acc = T(0);
        for (std::int64_t nb = 0; nb < N; ++nb)
          acc += kernels::sum(g.ptr() + (nb * CO + co) * OH * OW,
                              static_cast<std::size_t>(OH * OW));
        bias->grad.data[static_cast<std::size_t>(co)] += acc;
      }
    }
  };
  return t.record(std::move(y), std::move(parents), std::move(bwd), "conv2d");
}

// ---- batch norm ------------------------------------------------------------

template <typename T>
Var<T> batch_norm(Tape<T>& t, Var<T> x, Var<T> gamma, Var<T> beta, BnState<T>& state,
                  bool train, T momentum, T eps) {
  if (x->val.rank() != 4) throw std::invalid_argument("batch_norm: expects NCHW");
  const std::int64_t N = x->val.shape[0], C = x->val.shape[1];
  const std::int64_t HW = x->val.shape[2] * x->val.shape[3];
  if (gamma->val.numel() != C || beta->val.numel() != C)
    throw std::invalid_argument("batch_norm: affine parameter size mismatch");
  if (state.running_mean.data.empty()) {
    state.running_mean = Tensor<T>({C});
    state.running_var = Tensor<T>({C}, T(1));
  }
  if (!train && state.batches_seen == 0)
    throw std::runtime_error("batch_norm: eval mode requires populated running statistics");

  auto mean = std::make_shared<Tensor<T>>(std::vector<std::int64_t>{C});
  auto invstd = std::make_shared<Tensor<T>>(std::vector<std::int64_t>{C});
  const T m_count = static_cast<T>(N * HW);
  if (train) {
    for (std::int64_t c = 0; c < C; ++c) {
      double mu = 0;
      for (std::int64_t nb = 0; nb < N; ++nb)
        mu += kernels::sum(x->val.ptr() + (nb * C + c) * HW, static_cast<std::size_t>(HW));
      mu /= static_cast<double>(m_count);
      double var = 0;
      for (std::int64_t nb = 0; nb < N; ++nb) {
        const T* p = x->val.ptr() + (nb * C + c) * HW;
        for (std::int64_t i = 0; i < HW; ++i) {
          const double d = static_cast<double>(p[i]) - mu;
          var += d * d;
        }
      }
      var /= static_cast<double>(m_count);
      mean->data[static_cast<std::size_t>(c)] = static_cast<T>(mu);
      invstd->data[static_cast<std::size_t>(c)] =
          T(1) / std::sqrt(static_cast<T>(var) + eps);
      state.running_mean.data[static_cast<std::size_t>(c)] =
          (T(1) - momentum) * state.running_mean.data[static_cast<std::size_t>(c)] +
          momentum * static_cast<T>(mu);
      state.running_var.data[static_cast<std::size_t>(c)] =
          (T(1) - momentum) * state.running_var.data[static_cast<std::size_t>(c)] +
          momentum * static_cast<T>(var);
    }
    state.batches_seen++;
  } else {
    for (std::int64_t c = 0; c < C; ++c) {
      mean->data[static_cast<std::size_t>(c)] = state.running_mean.data[static_cast<std::size_t>(c)];
      invstd->data[static_cast<std::size_t>(c)] =
          T(1) / std::sqrt(state.running_var.data[static_cast<std::size_t>(c)] + eps);
    }
  }

  Tensor<T> y(x->val.shape);
  parallel_for(static_cast<std::size_t>(N * C), [&](std::size_t idx) {
    const std::int64_t c = static_cast<std::int64_t>(idx) % C;
    const T mu = mean->data[static_cast<std::size_t>(c)];
    const T is = invstd->data[static_cast<std::size_t>(c)];
    const T gm = gamma->val.data[static_cast<std::size_t>(c)];
    const T bt = beta->val.data[static_cast<std::size_t>(c)];
    const T* p = x->val.ptr() + static_cast<std::int64_t>(idx) * HW;
    T* q = y.ptr() + static_cast<std::int64_t>(idx) * HW;
    for (std::int64_t i = 0; i < HW; ++i) q[i] = (p[i] - mu) * is * gm + bt;
  });

  auto bwd = [x, gamma, beta, mean, invstd, N, C, HW, m_count, train](Node<T>& n) {
    const Tensor<T>& g = n.grad;
    if (gamma->requires_grad) gamma->ensure_grad();
    if (beta->requires_grad) beta->ensure_grad();
    if (x->requires_grad) x->ensure_grad();
    for (std::int64_t c = 0; c < C; ++c) {
      const T mu = mean->data[static_cast<std::size_t>(c)];
      const T is = invstd->data[static_cast<std::size_t>(c)];
      const T gm = gamma->val.data[static_cast<std::size_t>(c)];
      double sum_g = 0, sum_gx = 0;
      for (std::int64_t nb = 0; nb < N; ++nb) {
        const T* gp = g.ptr() + (nb * C + c) * HW;
        const T* xp = x->val.ptr() + (nb * C + c) * HW;
        for (std::int64_t i = 0; i < HW; ++i) {
          sum_g += static_cast<double>(gp[i]);
          sum_gx += static_cast<double>(gp[i]) * (static_cast<double>(xp[i]) - mu) * is;
        }
      }
      if (gamma->requires_grad) gamma->grad.data[static_cast<std::size_t>(c)] += static_cast<T>(sum_gx);
      if (beta->requires_grad) beta->grad.data[static_cast<std::size_t>(c)] += static_cast<T>(sum_g);
      if (!x->requires_grad) continue;
      if (train) {
        const T k1 = static_cast<T>(sum_g / m_count);
        const T k2 = static_cast<T>(sum_gx / m_count);
        for (std::int64_t nb = 0; nb < N; ++nb) {
          const T* gp = g.ptr() + (nb * C + c) * HW;
          const T* xp = x->val.ptr() + (nb * C + c) * HW;
          T* xg = x->grad.ptr() + (nb * C + c) * HW;
          for (std::int64_t i = 0; i < HW; ++i) {
            const T xhat = (xp[i] - mu) * is;
            xg[i] += gm * is * (gp[i] - k1 - xhat * k2);
          }
        }
      } else {
        for (std::int64_t nb = 0; nb < N; ++nb) {
          const T* gp = g.ptr() + (nb * C + c) * HW;
          T* xg = x->grad.ptr() + (nb * C + c) * HW;
          kernels::axpy(gm * is, gp, xg, static_cast<std::size_t>(HW));
        }
      }
    }
  };
  return t.record(std::move(y), {x, gamma, beta}, std::move(bwd), "batch_norm");
}

// ---- resize / pool / head ----------------------------------------------------

template <typename T>
Var<T> bilinear_upsample2(Tape<T>& t, Var<T> x) {
  if (x->val.rank() != 4) throw std::invalid_argument("bilinear_upsample2: expects NCHW");
  const std::int64_t N = x->val.shape[0], C = x->val.shape[1];
  const std::int64_t H = x->val.shape[2], W = x->val.shape[3];
  const std::int64_t OH = 2 * H, OW = 2 * W;

  // align_corners=false: in = (out + 0.5)/2 - 0.5, clamped at the borders.
  auto make_table = [](std::int64_t out_n, std::int64_t in_n,
                       std::vector<std::int64_t>& i0, std::vector<T>& w1) {
    i0.resize(static_cast<std::size_t>(out_n));
    w1.resize(static_cast<std::size_t>(out_n));
    for (std::int64_t o = 0; o < out_n; ++o) {
      double pos = (static_cast<double>(o) + 0.5) / 2.0 - 0.5;
      if (pos < 0) pos = 0;
      if (pos > static_cast<double>(in_n - 1)) pos = static_cast<double>(in_n - 1);
      const auto lo = static_cast<std::int64_t>(std::floor(pos));
      i0[static_cast<std::size_t>(o)] = std::min(lo, in_n - 1);
      w1[static_cast<std::size_t>(o)] = static_cast<T>(pos - static_cast<double>(lo));
    }
  };
  auto ty0 = std::make_shared<std::vector<std::int64_t>>();
  auto twy = std::make_shared<std::vector<T>>();
  auto tx0 = std::make_shared<std::vector<std::int64_t>>();
  auto twx = std::make_shared<std::vector<T>>();
  make_table(OH, H, *ty0, *twy);
  make_table(OW, W, *tx0, *twx);

  Tensor<T> y({N, C, OH, OW});
  parallel_for(static_cast<std::size_t>(N * C), [&](std::size_t nc) {
    const T* in = x->val.ptr() + static_cast<std::int64_t>(nc) * H * W;
    T* out = y.ptr() + static_cast<std::int64_t>(nc) * OH * OW;
    for (std::int64_t oy = 0; oy < OH; ++oy) {
      const std::int64_t y0 = (*ty0)[static_cast<std::size_t>(oy)];
      const std::int64_t y1 = std::min(y0 + 1, H - 1);
      const T wy = (*twy)[static_cast<std::size_t>(oy)];
      for (std::int64_t ox = 0; ox < OW; ++ox) {
        const std::int64_t x0 = (*tx0)[static_cast<std::size_t>(ox)];
        const std::int64_t x1 = std::min(x0 + 1, W - 1);
        const T wx = (*twx)[static_cast<std::size_t>(ox)];
        out[oy * OW + ox] = (T(1) - wy) * ((T(1) - wx) * in[y0 * W + x0] + wx * in[y0 * W + x1]) +
                            wy * ((T(1) - wx) * in[y1 * W + x0] + wx * in[y1 * W + x1]);
      }
    }
  });
  auto bwd = [x, ty0, twy, tx0, twx, N, C, H, W, OH, OW](Node<T>& n) {
    x->ensure_grad();
    parallel_for(static_cast<std::size_t>(N * C), [&](std::size_t nc) {
      const T* g = n.grad.ptr() + static_cast<std::int64_t>(nc) * OH * OW;
      T* xg = x->grad.ptr() + static_cast<std::int64_t>(nc) * H * W;
      for (std::int64_t oy = 0; oy < OH; ++oy) {
        const std::int64_t y0 = (*ty0)[static_cast<std::size_t>(oy)];
        const std::int64_t y1 = std::min(y0 + 1, H - 1);
        const T wy = (*twy)[static_cast<std::size_t>(oy)];
        for (std::int64_t ox = 0; ox < OW; ++ox) {
          const std::int64_t x0 = (*tx0)[static_cast<std::size_t>(ox)];
          const std::int64_t x1 = std::min(x0 + 1, W - 1);
          const T wx = (*twx)[static_cast<std::size_t>(ox)];
          const T gv = g[oy * OW + ox];
          xg[y0 * W + x0] += (T(1) - wy) * (T(1) - wx) * gv;
          xg[y0 * W + x1] += (T(1) - wy) * wx * gv;
          xg[y1 * W + x0] += wy * (T(1) - wx) * gv;
          xg[y1 * W + x1] += wy * wx * gv;
        }
      }
    });
  };
  return t.record(std::move(y), {x}, std::move(bwd), "bilinear_upsample2");
}

template <typename T>
Var<T> global_avg_pool(Tape<T>& t, Var<T> x) {
  const std::int64_t N = x->val.shape[0], C = x->val.shape[1];
  const std::int64_t HW = x->val.shape[2] * x->val.shape[3];
  Tensor<T> y({N, C});
  for (std::int64_t i = 0; i < N * C; ++i)
    y.data[static_cast<std::size_t>(i)] =
        kernels::sum(x->val.ptr() + i * HW, static_cast<std::size_t>(HW)) / static_cast<T>(HW);
  return t.record(std::move(y), {x},
                  [x, N, C, HW](Node<T>& n) {
                    x->ensure_grad();
                    for (std::int64_t i = 0; i < N * C; ++i) {
                      const T gv = n.grad.data[static_cast<std::size_t>(i)] / static_cast<T>(HW);
                      T* p = x->grad.ptr() + i * HW;
                      for (std::int64_t k = 0; k < HW; ++k) p[k] += gv;
                    }
                  },
                  "global_avg_pool");
}

template <typename T>
Var<T> linear(Tape<T>& t, Var<T> x, Var<T> w, Var<T> b) {
  const std::int64_t N = x->val.shape[0], CI = x->val.shape[1];
  const std::int64_t CO = w->val.shape[0];
  if (w->val.shape[1] != CI) throw std::invalid_argument("linear: weight shape mismatch");
  Tensor<T> y({N, CO});
  for (std::int64_t nb = 0; nb < N; ++nb)
    for (std::int64_t o = 0; o < CO; ++o)
      y.at2(nb, o) = kernels::dot(x->val.ptr() + nb * CI, w->val.ptr() + o * CI,
                                  static_cast<std::size_t>(CI)) +
                     (b ? b->val.data[static_cast<std::size_t>(o)] : T(0));
  std::vector<Var<T>> parents = b ? std::vector<Var<T>>{x, w, b} : std::vector<Var<T>>{x, w};
  auto bwd = [x, w, b, N, CI, CO](Node<T>& n) {
    if (x->requires_grad) {
      x->ensure_grad();
      for (std::int64_t nb = 0; nb < N; ++nb)
        for (std::int64_t o = 0; o < CO; ++o)
          kernels::axpy(n.grad.at2(nb, o), w->val.ptr() + o * CI, x->grad.ptr() + nb * CI,
                        static_cast<std::size_t>(CI));
    }
    if (w->requires_grad) {
      w->ensure_grad();
      for (std::int64_t o = 0; o < CO; ++o)
        for (std::int64_t nb = 0; nb < N; ++nb)
          kernels::axpy(n.grad.at2(nb, o), x->val.ptr() + nb * CI, w->grad.ptr() + o * CI,
                        static_cast<std::size_t>(CI));
    }
    if (b && b->requires_grad) {
      b->ensure_grad();
      for (std::int64_t o = 0; o < CO; ++o)
        for (std::int64_t nb = 0; nb < N; ++nb)
          b->grad.data[static_cast<std::size_t>(o)] += n.grad.at2(nb, o);
    }
  };
  return t.record(std::move(y), std::move(parents), std::move(bwd), "linear");
}

namespace {

// Shared stable softmax over the trailing axis of a (rows, cols) view.
template <typename T>
void softmax_forward(const T* in, T* out, std::int64_t rows, std::int64_t cols) {
  for (std::int64_t r = 0; r < rows; ++r) {
    const T* p = in + r * cols;
    T* q = out + r * cols;
    T mx = p[0];
    for (std::int64_t c = 1; c < cols; ++c) mx = std::max(mx, p[c]);
    T denom = T(0);
    for (std::int64_t c = 0; c < cols; ++c) {
      q[c] = std::exp(p[c] - mx);
      denom += q[c];
    }
    const T inv = T(1) / denom;
    for (std::int64_t c = 0; c < cols; ++c) q[c] *= inv;
  }
}

template <typename T>
void softmax_backward(const T* y, const T* g, T* out_accum, std::int64_t rows,
                      std::int64_t cols) {
  for (std::int64_t r = 0; r < rows; ++r) {
    const T* yr = y + r * cols;
    const T* gr = g + r * cols;
    T dotv = kernels::dot(yr, gr, static_cast<std::size_t>(cols));
    T* o = out_accum + r * cols;
    for (std::int64_t c = 0; c < cols; ++c) o[c] += yr[c] * (gr[c] - dotv);
  }
}

}  // namespace

template <typename T>
Var<T> softmax_rows(Tape<T>& t, Var<T> x) {
  if (x->val.rank() != 2) throw std::invalid_argument("softmax_rows: expects a matrix");
  for (const T v : x->val.data)
    if (std::isnan(static_cast<double>(v)))
      throw std::invalid_argument("softmax: NaN input");
  Tensor<T> y(x->val.shape);
  softmax_forward(x->val.ptr(), y.ptr(), x->val.shape[0], x->val.shape[1]);
  return t.record(std::move(y), {x},
                  [x](Node<T>& n) {
                    x->ensure_grad();
                    softmax_backward(n.val.ptr(), n.grad.ptr(), x->grad.ptr(),
                                     n.val.shape[0], n.val.shape[1]);
                  },
                  "softmax");
}

template <typename T>
Var<T> softmax_lastdim(Tape<T>& t, Var<T> x) {
  if (x->val.rank() != 3) throw std::invalid_argument("softmax_lastdim: expects (G,R,C)");
  for (const T v : x->val.data)
    if (std::isnan(static_cast<double>(v)))
      throw std::invalid_argument("softmax: NaN input");
  const std::int64_t rows = x->val.shape[0] * x->val.shape[1], cols = x->val.shape[2];
  Tensor<T> y(x->val.shape);
  softmax_forward(x->val.ptr(), y.ptr(), rows, cols);
  return t.record(std::move(y), {x},
                  [x, rows, cols](Node<T>& n) {
                    x->ensure_grad();
                    softmax_backward(n.val.ptr(), n.grad.ptr(), x->grad.ptr(), rows, cols);
                  },
                  "softmax_lastdim");
}

template <typename T>
Var<T> cross_entropy_soft(Tape<T>& t, Var<T> logits, const Tensor<T>& labels) {
  if (!logits->val.same_shape(labels))
    throw std::invalid_argument("cross_entropy_soft: label shape mismatch");
  const std::int64_t N = logits->val.shape[0], K = logits->val.shape[1];
  auto probs = std::make_shared<Tensor<T>>(logits->val.shape);
  softmax_forward(logits->val.ptr(), probs->ptr(), N, K);
  double loss = 0;
  for (std::int64_t i = 0; i < N * K; ++i) {
    const double p = std::max(static_cast<double>(probs->data[static_cast<std::size_t>(i)]), 1e-30);
    loss -= static_cast<double>(labels.data[static_cast<std::size_t>(i)]) * std::log(p);
  }
  Tensor<T> y({1});
  y.data[0] = static_cast<T>(loss / static_cast<double>(N));
  auto labels_copy = std::make_shared<Tensor<T>>(labels);
  return t.record(std::move(y), {logits},
                  [logits, probs, labels_copy, N, K](Node<T>& n) {
                    logits->ensure_grad();
                    const T gs = n.grad.data[0] / static_cast<T>(N);
                    for (std::int64_t i = 0; i < N * K; ++i)
                      logits->grad.data[static_cast<std::size_t>(i)] +=
                          gs * (probs->data[static_cast<std::size_t>(i)] -
                                labels_copy->data[static_cast<std::size_t>(i)]);
                  },
                  "cross_entropy");
}

template <typename T>
Var<T> sum_all(Tape<T>& t, Var<T> x) {
  Tensor<T> y({1});
  y.data[0] = kernels::sum(x->val.ptr(), x->val.data.size());
  return t.record(std::move(y), {x},
                  [x](Node<T>& n) {
                    x->ensure_grad();
                    const T g = n.grad.data[0];
                    for (auto& v : x->grad.data) v += g;
                  },
                  "sum_all");
}

template <typename T>
Var<T> sumsq_all(Tape<T>& t, Var<T> x) {
  Tensor<T> y({1});
  y.data[0] = kernels::sumsq(x->val.ptr(), x->val.data.size());
  return t.record(std::move(y), {x},
                  [x](Node<T>& n) {
                    x->ensure_grad();
                    kernels::axpy(T(2) * n.grad.data[0], x->val.ptr(), x->grad.ptr(),
                                  x->val.data.size());
                  },
                  "sumsq_all");
}

// ---- attention plumbing -------------------------------------------------------

template <typename T>
Var<T> l2norm_rows(Tape<T>& t, Var<T> x, T eps) {
  if (x->val.rank() != 3) throw std::invalid_argument("l2norm_rows: expects (G,C,T)");
  const std::int64_t rows = x->val.shape[0] * x->val.shape[1], cols = x->val.shape[2];
  Tensor<T> y(x->val.shape);
  auto norms = std::make_shared<std::vector<T>>(static_cast<std::size_t>(rows));
  for (std::int64_t r = 0; r < rows; ++r) {
    const T* p = x->val.ptr() + r * cols;
    const T s = std::sqrt(kernels::sumsq(p, static_cast<std::size_t>(cols)));
    (*norms)[static_cast<std::size_t>(r)] = s;
    const T inv = T(1) / (s + eps);
    T* q = y.ptr() + r * cols;
    for (std::int64_t c = 0; c < cols; ++c) q[c] = p[c] * inv;
  }
  return t.record(std::move(y), {x},
                  [x, norms, rows, cols, eps](Node<T>& n) {
                    x->ensure_grad();
                    for (std::int64_t r = 0; r < rows; ++r) {
                      const T s = (*norms)[static_cast<std::size_t>(r)];
                      const T* p = x->val.ptr() + r * cols;
                      const T* g = n.grad.ptr() + r * cols;
                      T* xg = x->grad.ptr() + r * cols;
                      const T inv = T(1) / (s + eps);
                      if (s < T(1e-30)) {
                        kernels::axpy(inv, g, xg, static_cast<std::size_t>(cols));
                        continue;
                      }
                      const T gx = kernels::dot(g, p, static_cast<std::size_t>(cols));
                      const T k = gx / (s * (s + eps) * (s + eps));
                      for (std::int64_t c = 0; c < cols; ++c)
                        xg[c] += g[c] * inv - p[c] * k;
                    }
                  },
                  "l2norm_rows");
}

template <typename T>
Var<T> bmm_nt(Tape<T>& t, Var<T> a, Var<T> b) {
  // (G,R,T) x (G,C,T) -> (G,R,C)
  if (a->val.rank() != 3 || b->val.rank() != 3 || a->val.shape[0] != b->val.shape[0] ||
      a->val.shape[2] != b->val.shape[2])
    throw std::invalid_argument("bmm_nt: shape mismatch");
  const std::int64_t G = a->val.shape[0], R = a->val.shape[1], C = b->val.shape[1],
                     Tk = a->val.shape[2];
  Tensor<T> y({G, R, C});
  parallel_for(static_cast<std::size_t>(G), [&](std::size_t g) {
    const T* ap = a->val.ptr() + static_cast<std::int64_t>(g) * R * Tk;
    const T* bp = b->val.ptr() + static_cast<std::int64_t>(g) * C * Tk;
    T* yp = y.ptr() + static_cast<std::int64_t>(g) * R * C;
    for (std::int64_t r = 0; r < R; ++r)
      for (std::int64_t c = 0; c < C; ++c)
        yp[r * C + c] = kernels::dot(ap + r * Tk, bp + c * Tk, static_cast<std::size_t>(Tk));
  });
  auto bwd = [a, b, G, R, C, Tk](Node<T>& n) {
    if (a->requires_grad) a->ensure_grad();
    if (b->requires_grad) b->ensure_grad();
    parallel_for(static_cast<std::size_t>(G), [&](std::size_t g) {
      const T* gp = n.grad.ptr() + static_cast<std::int64_t>(g) * R * C;
      const T* ap = a->val.ptr() + static_cast<std::int64_t>(g) * R * Tk;
      const T* bp = b->val.ptr() + static_cast<std::int64_t>(g) * C * Tk;
      if (a->requires_grad) {
        T* ag = a->grad.ptr() + static_cast<std::int64_t>(g) * R * Tk;
        for (std::int64_t r = 0; r < R; ++r)
          for (std::int64_t c = 0; c < C; ++c)
            kernels::axpy(gp[r * C + c], bp + c * Tk, ag + r * Tk,
                          static_cast<std::size_t>(Tk));
      }
      if (b->requires_grad) {
        T* bg = b->grad.ptr() + static_cast<std::int64_t>(g) * C * Tk;
        for (std::int64_t c = 0; c < C; ++c)
          for (std::int64_t r = 0; r < R; ++r)
            kernels::axpy(gp[r * C + c], ap + r * Tk, bg + c * Tk,
                          static_cast<std::size_t>(Tk));
      }
    });
  };
  return t.record(std::move(y), {a, b}, std::move(bwd), "bmm_nt");
}

template <typename T>
Var<T> bmm_nn(Tape<T>& t, Var<T> s, Var<T> v) {
  // (G,R,C) x (G,C,T) -> (G,R,T)
  if (s->val.rank() != 3 || v->val.rank() != 3 || s->val.shape[0] != v->val.shape[0] ||
      s->val.shape[2] != v->val.shape[1])
    throw std::invalid_argument("bmm_nn: shape mismatch");
  const std::int64_t G = s->val.shape[0], R = s->val.shape[1], C = s->val.shape[2],
                     Tk = v->val.shape[2];
  Tensor<T> y({G, R, Tk});
  parallel_for(static_cast<std::size_t>(G), [&](std::size_t g) {
    const T* sp = s->val.ptr() + static_cast<std::int64_t>(g) * R * C;
    const T* vp = v->val.ptr() + static_cast<std::int64_t>(g) * C * Tk;
    T* yp = y.ptr() + static_cast<std::int64_t>(g) * R * Tk;
    for (std::int64_t r = 0; r < R; ++r)
      for (std::int64_t c = 0; c < C; ++c)
        kernels::axpy(sp[r * C + c], vp + c * Tk, yp + r * Tk, static_cast<std::size_t>(Tk));
  });
  auto bwd = [s, v, G, R, C, Tk](Node<T>& n) {
    if (s->requires_grad) s->ensure_grad();
    if (v->requires_grad) v->ensure_grad();
    parallel_for(static_cast<std::size_t>(G), [&](std::size_t g) {
      const T* gp = n.grad.ptr() + static_cast<std::int64_t>(g) * R * Tk;
      const T* sp = s->val.ptr() + static_cast<std::int64_t>(g) * R * C;
      const T* vp = v->val.ptr() + static_cast<std::int64_t>(g) * C * Tk;
      if (s->requires_grad) {
        T* sg = s->grad.ptr() + static_cast<std::int64_t>(g) * R * C;
        for (std::int64_t r = 0; r < R; ++r)
          for (std::int64_t c = 0; c < C; ++c)
            sg[r * C + c] += kernels::dot(gp + r * Tk, vp + c * Tk,
                                          static_cast<std::size_t>(Tk));
      }
      if (v->requires_grad) {
        T* vg = v->grad.ptr() + static_cast<std::int64_t>(g) * C * Tk;
        for (std::int64_t r = 0; r < R; ++r)
          for (std::int64_t c = 0; c < C; ++c)
            kernels::axpy(sp[r * C + c], gp + r * Tk, vg + c * Tk,
                          static_cast<std::size_t>(Tk));
      }
    });
  };
  return t.record(std::move(y), {s, v}, std::move(bwd), "bmm_nn");
}

template <typename T>
Var<T> div_by_exp(Tape<T>& t, Var<T> x, Var<T> log_tau, int heads) {
  if (x->val.rank() != 3) throw std::invalid_argument("div_by_exp: expects (G,R,C)");
  if (log_tau->val.numel() != heads)
    throw std::invalid_argument("div_by_exp: one temperature per head");
  const std::int64_t G = x->val.shape[0], RC = x->val.shape[1] * x->val.shape[2];
  Tensor<T> y(x->val.shape);
  for (std::int64_t g = 0; g < G; ++g) {
    const T inv = std::exp(-log_tau->val.data[static_cast<std::size_t>(g % heads)]);
    const T* p = x->val.ptr() + g * RC;
    T* q = y.ptr() + g * RC;
    for (std::int64_t i = 0; i < RC; ++i) q[i] = p[i] * inv;
  }
  auto bwd = [x, log_tau, heads, G, RC](Node<T>& n) {
    if (x->requires_grad) x->ensure_grad();
    if (log_tau->requires_grad) log_tau->ensure_grad();
    for (std::int64_t g = 0; g < G; ++g) {
      const T inv = std::exp(-log_tau->val.data[static_cast<std::size_t>(g % heads)]);
      const T* gp = n.grad.ptr() + g * RC;
      if (x->requires_grad)
        kernels::axpy(inv, gp, x->grad.ptr() + g * RC, static_cast<std::size_t>(RC));
      if (log_tau->requires_grad) {
        // d/dt (x e^{-t}) = -y
        const T gy = kernels::dot(gp, n.val.ptr() + g * RC, static_cast<std::size_t>(RC));
        log_tau->grad.data[static_cast<std::size_t>(g % heads)] -= gy;
      }
    }
  };
  return t.record(std::move(y), {x, log_tau}, std::move(bwd), "div_by_exp");
}

template <typename T>
Var<T> to_heads(Tape<T>& t, Var<T> x, int heads) {
  if (x->val.rank() != 4) throw std::invalid_argument("to_heads: expects NCHW");
  const std::int64_t N = x->val.shape[0], C = x->val.shape[1];
  const std::int64_t HW = x->val.shape[2] * x->val.shape[3];
  if (C % heads != 0) throw std::invalid_argument("to_heads: channels not divisible by heads");
  Tensor<T> y({N * heads, C / heads, HW});
  std::copy(x->val.data.begin(), x->val.data.end(), y.data.begin());
  return t.record(std::move(y), {x},
                  [x](Node<T>& n) { accum(*x, n.grad); }, "to_heads");
}

template <typename T>
Var<T> from_heads(Tape<T>& t, Var<T> x, int heads, std::int64_t H, std::int64_t W) {
  if (x->val.rank() != 3) throw std::invalid_argument("from_heads: expects (G,Ch,T)");
  const std::int64_t G = x->val.shape[0], Ch = x->val.shape[1];
  if (G % heads != 0 || x->val.shape[2] != H * W)
    throw std::invalid_argument("from_heads: shape mismatch");
  Tensor<T> y({G / heads, Ch * heads, H, W});
  std::copy(x->val.data.begin(), x->val.data.end(), y.data.begin());
  return t.record(std::move(y), {x},
                  [x](Node<T>& n) { accum(*x, n.grad); }, "from_heads");
}

#define SF_INST_OPS(T)                                                                       \
  template void backward<T>(Tape<T>&, const Var<T>&);                                       \
  template void check_finite<T>(const Var<T>&, const std::string&);                         \
  template Var<T> add<T>(Tape<T>&, Var<T>, Var<T>);                                         \
  template Var<T> sub<T>(Tape<T>&, Var<T>, Var<T>);                                         \
  template Var<T> mul<T>(Tape<T>&, Var<T>, Var<T>);                                         \
  template Var<T> scale<T>(Tape<T>&, Var<T>, T);                                            \
  template Var<T> log_op<T>(Tape<T>&, Var<T>);                                              \
  template Var<T> mish<T>(Tape<T>&, Var<T>);                                                \
  template Var<T> swish<T>(Tape<T>&, Var<T>);                                               \
  template Var<T> modulus_pair<T>(Tape<T>&, Var<T>, Var<T>);                                \
  template Var<T> concat_channels<T>(Tape<T>&, const std::vector<Var<T>>&);                 \
  template Var<T> slice_channels<T>(Tape<T>&, Var<T>, std::int64_t, std::int64_t);          \
  template Var<T> pad_hw<T>(Tape<T>&, Var<T>, int, int, int, int);                          \
  template Var<T> crop_hw<T>(Tape<T>&, Var<T>, int, int, std::int64_t, std::int64_t);       \
  template Var<T> conv2d<T>(Tape<T>&, Var<T>, Var<T>, Var<T>, int, int, int, int, int);     \
  template Var<T> batch_norm<T>(Tape<T>&, Var<T>, Var<T>, Var<T>, BnState<T>&, bool, T, T); \
  template Var<T> bilinear_upsample2<T>(Tape<T>&, Var<T>);                                  \
  template Var<T> global_avg_pool<T>(Tape<T>&, Var<T>);                                     \
  template Var<T> linear<T>(Tape<T>&, Var<T>, Var<T>, Var<T>);                              \
  template Var<T> softmax_rows<T>(Tape<T>&, Var<T>);                                        \
  template Var<T> softmax_lastdim<T>(Tape<T>&, Var<T>);                                     \
  template Var<T> cross_entropy_soft<T>(Tape<T>&, Var<T>, const Tensor<T>&);                \
  template Var<T> sum_all<T>(Tape<T>&, Var<T>);                                             \
  template Var<T> sumsq_all<T>(Tape<T>&, Var<T>);                                           \
  template Var<T> l2norm_rows<T>(Tape<T>&, Var<T>, T);                                      \
  template Var<T> bmm_nt<T>(Tape<T>&, Var<T>, Var<T>);                                      \
  template Var<T> bmm_nn<T>(Tape<T>&, Var<T>, Var<T>);                                      \
  template Var<T> div_by_exp<T>(Tape<T>&, Var<T>, Var<T>, int);                             \
  template Var<T> to_heads<T>(Tape<T>&, Var<T>, int);                                       \
  template Var<T> from_heads<T>(Tape<T>&, Var<T>, int, std::int64_t, std::int64_t);

SF_INST_OPS(float)
SF_INST_OPS(double)
#undef SF_INST_OPS

}  // namespace sf::ad
