// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the scatterformer authors
#include "sf/attention.hpp"

#include <cmath>
#include <stdexcept>

#include "sf/fft.hpp"
#include "sf/kernels.hpp"
#include "sf/parallel.hpp"
#include "sf/scattering.hpp"

namespace sf::ad {

int scatter_embed_maps(int J, int L, int order) {
  int maps = 1;
  if (order >= 1) maps += J * L;
  if (order >= 2) maps += (J * (J - 1) / 2) * L * L;
  return maps;
}

namespace {

template <typename T>
using CMat = ComplexTensor<T>;

template <typename T>
CMat<T> fft_padded(const T* src, std::int64_t H, std::int64_t W, std::int64_t hp,
                   std::int64_t wp) {
  CMat<T> out({hp, wp});
  for (std::int64_t r = 0; r < H; ++r)
    std::copy_n(src + r * W, W, out.re.begin() + r * wp);
  fft::fft2_inplace(out, false);
  return out;
}

template <typename T>
void mul_real(CMat<T>& spec, const Tensor<T>& f) {
  kernels::cmul_real(spec.re.data(), spec.im.data(), f.ptr(), spec.re.data(), spec.im.data(),
                     spec.re.size());
}

template <typename T>
CMat<T> fold2(const CMat<T>& s, int log2k) {
  return log2k > 0 ? fft::fold_spectrum(s, 1 << log2k, 1 << log2k) : s;
}

template <typename T>
CMat<T> tile2(const CMat<T>& s, int log2k) {
  if (log2k <= 0) return s;
  return fft::tile_spectrum(s, 1 << log2k, 1 << log2k, s.shape[0] << log2k,
                            s.shape[1] << log2k);
}

// Writes the real part of ifft(spec), cropped to (oh, ow), into dst.
template <typename T>
void ifft_real_crop(CMat<T> spec, std::int64_t oh, std::int64_t ow, T* dst) {
  fft::fft2_inplace(spec, true);
  const std::int64_t wp = spec.shape[1];
  for (std::int64_t r = 0; r < oh; ++r)
    std::copy_n(spec.re.begin() + r * wp, ow, dst + r * ow);
}

// fft of a zero-embedded (oh, ow) -> (h, w) real gradient block.
template <typename T>
CMat<T> fft_embedded(const T* g, std::int64_t oh, std::int64_t ow, std::int64_t h,
                     std::int64_t w) {
  CMat<T> out({h, w});
  for (std::int64_t r = 0; r < oh; ++r)
    std::copy_n(g + r * ow, ow, out.re.begin() + r * w);
  fft::fft2_inplace(out, false);
  return out;
}

}  // namespace

template <typename T>
Var<T> scatter_embed(Tape<T>& t, Var<T> x, const wavelets::FilterBank<T>& bank, int order) {
  if (x->val.rank() != 4) throw std::invalid_argument("scatter_embed: expects NCHW");
  if (order < 0 || order > 2) throw std::invalid_argument("scatter_embed: order must be 0..2");
  const std::int64_t N = x->val.shape[0], C = x->val.shape[1];
  const std::int64_t H = x->val.shape[2], W = x->val.shape[3];
  const int J = bank.J, L = bank.L;
  const std::int64_t sub = std::int64_t{1} << J;
  if (H % sub != 0 || W % sub != 0)
    throw std::invalid_argument("scatter_embed: H and W must be divisible by 2^J");
  if (bank.h < H || bank.w < W)
    throw std::invalid_argument("scatter_embed: bank grid smaller than input");
  const std::int64_t hp = bank.h, wp = bank.w;
  const std::int64_t oh = H / sub, ow = W / sub;
  const int maps = scatter_embed_maps(J, L, order);

  struct PathCache {
    std::vector<CMat<T>> z1;  // complex band outputs per order-1 path
    std::vector<CMat<T>> z2;  // per order-2 path
  };
  auto caches = std::make_shared<std::vector<PathCache>>();
  const bool keep = t.recording;
  if (keep) caches->resize(static_cast<std::size_t>(N * C));

  const auto paths2 = scattering::admissible_paths(J, L, 2);
  Tensor<T> y({N, C * maps, oh, ow});

  parallel_for(static_cast<std::size_t>(N * C), [&](std::size_t nc) {
    const std::int64_t n = static_cast<std::int64_t>(nc) / C;
    const std::int64_t c = static_cast<std::int64_t>(nc) % C;
    PathCache* cache = keep ? &(*caches)[nc] : nullptr;
    CMat<T> spec = fft_padded(x->val.ptr() + (n * C + c) * H * W, H, W, hp, wp);
    T* out0 = y.ptr() + (n * C + c) * maps * oh * ow;
    int mi = 0;
    {
      CMat<T> s0 = spec;
      mul_real(s0, bank.phi(0));
      ifft_real_crop(fold2(s0, J), oh, ow, out0 + (mi++) * oh * ow);
    }
    if (order >= 1) {
      std::vector<CMat<T>> u1spec;
      if (order >= 2) u1spec.reserve(static_cast<std::size_t>(J * L));
      for (int j = 1; j <= J; ++j) {
        for (int l = 0; l < L; ++l) {
          CMat<T> band = spec;
          mul_real(band, bank.psi(j, l, 0));
          CMat<T> z = fold2(band, j);
          fft::fft2_inplace(z, true);
          Tensor<T> u({z.shape[0], z.shape[1]});
          kernels::cmodulus(z.re.data(), z.im.data(), u.ptr(), u.data.size());
          if (cache) cache->z1.push_back(z);
          CMat<T> us = fft::fft2(u, false);
          CMat<T> s1 = us;
          mul_real(s1, bank.phi(j));
          ifft_real_crop(fold2(s1, J - j), oh, ow, out0 + (mi++) * oh * ow);
          if (order >= 2) u1spec.push_back(std::move(us));
        }
      }
      if (order >= 2) {
        for (const auto& p : paths2) {
          const int j1 = p[0].j, l1 = p[0].l, j2 = p[1].j, l2 = p[1].l;
          const auto& us = u1spec[static_cast<std::size_t>((j1 - 1) * L + l1)];
          CMat<T> band = us;
          mul_real(band, bank.psi(j2, l2, j1));
          CMat<T> z = fold2(band, j2 - j1);
          fft::fft2_inplace(z, true);
          Tensor<T> u({z.shape[0], z.shape[1]});
          kernels::cmodulus(z.re.data(), z.im.data(), u.ptr(), u.data.size());
          if (cache) cache->z2.push_back(z);
          CMat<T> s2 = fft::fft2(u, false);
          mul_real(s2, bank.phi(j2));
          ifft_real_crop(fold2(s2, J - j2), oh, ow, out0 + (mi++) * oh * ow);
        }
      }
    }
  });

  const wavelets::FilterBank<T>* bankp = &bank;
  auto bwd = [x, caches, bankp, paths2, N, C, H, W, hp, wp, oh, ow, maps, order,
              J, L](Node<T>& nd) {
    x->ensure_grad();
    parallel_for(static_cast<std::size_t>(N * C), [&](std::size_t nc) {
      const std::int64_t n = static_cast<std::int64_t>(nc) / C;
      const std::int64_t c = static_cast<std::int64_t>(nc) % C;
      const PathCache& cache = (*caches)[nc];
      const T* g0 = nd.grad.ptr() + (n * C + c) * maps * oh * ow;
      CMat<T> dspec({hp, wp});
      {
        CMat<T> gs = tile2(fft_embedded(g0, oh, ow, hp >> J, wp >> J), J);
        mul_real(gs, bankp->phi(0));
        kernels::vadd(dspec.re.data(), gs.re.data(), dspec.re.data(), dspec.re.size());
        kernels::vadd(dspec.im.data(), gs.im.data(), dspec.im.data(), dspec.im.size());
      }
      if (order >= 1) {
        // Channel layout written by the forward pass: [S0 | all order-1 maps
        // in (j,l) order | all order-2 maps in paths2 order].
        const std::int64_t base2 = 1 + static_cast<std::int64_t>(J) * L;
        std::size_t p2 = 0;
        for (int j1 = 1; j1 <= J; ++j1) {
          for (int l1 = 0; l1 < L; ++l1) {
            const std::size_t i1 = static_cast<std::size_t>((j1 - 1) * L + l1);
            const CMat<T>& z1 = cache.z1[i1];
            const std::int64_t h1 = z1.shape[0], w1 = z1.shape[1];
            // dU1 spectrum accumulates the phi term and the order-2 bands.
            CMat<T> du1s = tile2(
                fft_embedded(g0 + (1 + static_cast<std::int64_t>(i1)) * oh * ow, oh, ow,
                             hp >> J, wp >> J),
                J - j1);
            mul_real(du1s, bankp->phi(j1));
            if (order >= 2) {
              for (int j2 = j1 + 1; j2 <= J; ++j2) {
                for (int l2 = 0; l2 < L; ++l2) {
                  const CMat<T>& z2 = cache.z2[p2];
                  const T* g2 = g0 + (base2 + static_cast<std::int64_t>(p2)) * oh * ow;
                  ++p2;
                  CMat<T> du2s =
                      tile2(fft_embedded(g2, oh, ow, hp >> J, wp >> J), J - j2);
                  mul_real(du2s, bankp->phi(j2));
                  fft::fft2_inplace(du2s, true);
                  // du2s.re now holds dU2; chain through the modulus
                  CMat<T> dz2({z2.shape[0], z2.shape[1]});
                  for (std::size_t i = 0; i < dz2.re.size(); ++i) {
                    const T zr = z2.re[i], zi = z2.im[i];
                    const T r = std::sqrt(zr * zr + zi * zi);
                    if (r > T(0)) {
                      dz2.re[i] = du2s.re[i] * zr / r;
                      dz2.im[i] = du2s.re[i] * zi / r;
                    }
                  }
                  CMat<T> dz2s = dz2;
                  fft::fft2_inplace(dz2s, false);
                  CMat<T> up = tile2(dz2s, j2 - j1);
                  mul_real(up, bankp->psi(j2, l2, j1));
                  kernels::vadd(du1s.re.data(), up.re.data(), du1s.re.data(), du1s.re.size());
                  kernels::vadd(du1s.im.data(), up.im.data(), du1s.im.data(), du1s.im.size());
                }
              }
            }
            fft::fft2_inplace(du1s, true);  // real part = dU1
            CMat<T> dz1({h1, w1});
            for (std::size_t i = 0; i < dz1.re.size(); ++i) {
              const T zr = z1.re[i], zi = z1.im[i];
              const T r = std::sqrt(zr * zr + zi * zi);
              if (r > T(0)) {
                dz1.re[i] = du1s.re[i] * zr / r;
                dz1.im[i] = du1s.re[i] * zi / r;
              }
            }
            fft::fft2_inplace(dz1, false);
            CMat<T> up = tile2(dz1, j1);
            mul_real(up, bankp->psi(j1, l1, 0));
            kernels::vadd(dspec.re.data(), up.re.data(), dspec.re.data(), dspec.re.size());
            kernels::vadd(dspec.im.data(), up.im.data(), dspec.im.data(), dspec.im.size());
          }
        }
      }
      fft::fft2_inplace(dspec, true);
      T* xg = x->grad.ptr() + (n * C + c) * H * W;
      for (std::int64_t r = 0; r < H; ++r)
        kernels::vadd(xg + r * W, dspec.re.data() + r * wp, xg + r * W,
                      static_cast<std::size_t>(W));
    });
  };
  return t.record(std::move(y), {x}, std::move(bwd), "scatter_embed");
}

template <typename T>
Var<T> lfu(Tape<T>& t, Var<T> x, Var<T> w_re, Var<T> w_im) {
  if (x->val.rank() != 4) throw std::invalid_argument("lfu: expects NCHW");
  const std::int64_t N = x->val.shape[0], C = x->val.shape[1];
  const std::int64_t H = x->val.shape[2], W = x->val.shape[3];
  if (w_re->val.shape != std::vector<std::int64_t>{C, C} ||
      w_im->val.shape != std::vector<std::int64_t>{C, C})
    throw std::invalid_argument("lfu: mixing matrices must be (C, C)");
  const std::int64_t hp = fft::next_pow2(H), wp = fft::next_pow2(W);
  const std::int64_t B = hp * wp;

  // Channel spectra per sample, needed again by the backward pass.
  auto spectra = std::make_shared<std::vector<CMat<T>>>();
  spectra->resize(static_cast<std::size_t>(N * C));
  parallel_for(static_cast<std::size_t>(N * C), [&](std::size_t nc) {
    const std::int64_t n = static_cast<std::int64_t>(nc) / C;
    const std::int64_t c = static_cast<std::int64_t>(nc) % C;
    (*spectra)[nc] = fft_padded(x->val.ptr() + (n * C + c) * H * W, H, W, hp, wp);
  });

  Tensor<T> y(x->val.shape);
  parallel_for(static_cast<std::size_t>(N * C), [&](std::size_t no) {
    const std::int64_t n = static_cast<std::int64_t>(no) / C;
    const std::int64_t o = static_cast<std::int64_t>(no) % C;
    CMat<T> acc({hp, wp});
    std::vector<T> tr(static_cast<std::size_t>(B)), ti(static_cast<std::size_t>(B));
    for (std::int64_t i = 0; i < C; ++i) {
      const CMat<T>& xs = (*spectra)[static_cast<std::size_t>(n * C + i)];
      const T mr = w_re->val.at2(o, i), mi = w_im->val.at2(o, i);
      for (std::int64_t b = 0; b < B; ++b) {
        const auto k = static_cast<std::size_t>(b);
        acc.re[k] += mr * xs.re[k] - mi * xs.im[k];
        acc.im[k] += mr * xs.im[k] + mi * xs.re[k];
      }
    }
    ifft_real_crop(std::move(acc), H, W, y.ptr() + (n * C + o) * H * W);
  });

  auto bwd = [x, w_re, w_im, spectra, N, C, H, W, hp, wp, B](Node<T>& nd) {
    // Spectra of the output gradients.
    std::vector<CMat<T>> gspec(static_cast<std::size_t>(N * C));
    parallel_for(static_cast<std::size_t>(N * C), [&](std::size_t no) {
      const std::int64_t n = static_cast<std::int64_t>(no) / C;
      const std::int64_t o = static_cast<std::int64_t>(no) % C;
      gspec[no] = fft_padded(nd.grad.ptr() + (n * C + o) * H * W, H, W, hp, wp);
    });
    if (x->requires_grad) {
      x->ensure_grad();
      parallel_for(static_cast<std::size_t>(N * C), [&](std::size_t ni) {
        const std::int64_t n = static_cast<std::int64_t>(ni) / C;
        const std::int64_t i = static_cast<std::int64_t>(ni) % C;
        CMat<T> acc({hp, wp});
        for (std::int64_t o = 0; o < C; ++o) {
          const CMat<T>& gs = gspec[static_cast<std::size_t>(n * C + o)];
          const T mr = w_re->val.at2(o, i), mi = w_im->val.at2(o, i);
          // conj(M) * G
          for (std::int64_t b = 0; b < B; ++b) {
            const auto k = static_cast<std::size_t>(b);
            acc.re[k] += mr * gs.re[k] + mi * gs.im[k];
            acc.im[k] += mr * gs.im[k] - mi * gs.re[k];
          }
        }
        fft::fft2_inplace(acc, true);
        T* xg = x->grad.ptr() + (n * C + i) * H * W;
        for (std::int64_t r = 0; r < H; ++r)
          kernels::vadd(xg + r * W, acc.re.data() + r * wp, xg + r * W,
                        static_cast<std::size_t>(W));
      });
    }
    if (w_re->requires_grad || w_im->requires_grad) {
      w_re->ensure_grad();
      w_im->ensure_grad();
      for (std::int64_t n = 0; n < N; ++n) {
        for (std::int64_t o = 0; o < C; ++o) {
          const CMat<T>& gs = gspec[static_cast<std::size_t>(n * C + o)];
          for (std::int64_t i = 0; i < C; ++i) {
            const CMat<T>& xs = (*spectra)[static_cast<std::size_t>(n * C + i)];
            double dre = 0, dim = 0;
            for (std::int64_t b = 0; b < B; ++b) {
              const auto k = static_cast<std::size_t>(b);
              // s = conj(G) * X
              const double sr = double(gs.re[k]) * xs.re[k] + double(gs.im[k]) * xs.im[k];
              const double si = double(gs.re[k]) * xs.im[k] - double(gs.im[k]) * xs.re[k];
              dre += sr;
              dim -= si;
            }
            w_re->grad.at2(o, i) += static_cast<T>(dre);
            w_im->grad.at2(o, i) += static_cast<T>(-dim);
          }
        }
      }
    }
  };
  return t.record(std::move(y), {x, w_re, w_im}, std::move(bwd), "lfu");
}

#define SF_INST_FREQ(T)                                                                       \
  template Var<T> scatter_embed<T>(Tape<T>&, Var<T>, const wavelets::FilterBank<T>&, int);    \
  template Var<T> lfu<T>(Tape<T>&, Var<T>, Var<T>, Var<T>);

SF_INST_FREQ(float)
SF_INST_FREQ(double)
#undef SF_INST_FREQ

}  // namespace sf::ad

// ---- attention blocks --------------------------------------------------------

namespace sf::attn {

using ad::Tape;
using ad::Var;

template <typename T>
Var<T> xca(Tape<T>& t, Var<T> q, Var<T> k, Var<T> v, Var<T> log_tau, int heads) {
  const std::int64_t H = q->val.shape[2], W = q->val.shape[3];
  auto qh = ad::l2norm_rows(t, ad::to_heads(t, q, heads));
  auto kh = ad::l2norm_rows(t, ad::to_heads(t, k, heads));
  auto vh = ad::to_heads(t, v, heads);
  auto scores = ad::div_by_exp(t, ad::bmm_nt(t, qh, kh), log_tau, heads);
  auto attnmap = ad::softmax_lastdim(t, scores);
  return ad::from_heads(t, ad::bmm_nn(t, attnmap, vh), heads, H, W);
}

template <typename T>
Var<T> lepe(Tape<T>& t, Var<T> x, Var<T> dw_kernel) {
  const int C = static_cast<int>(x->val.shape[1]);
  return ad::conv2d(t, x, dw_kernel, Var<T>{}, 1, 1, 1, 1, C);
}

template <typename T>
Var<T> faa(Tape<T>& t, Var<T> x, const FaaWeights<T>& w,
           const wavelets::FilterBank<T>& bank, int heads, QMode qmode, bool train,
           FaaCapture<T>* capture) {
  const std::int64_t C = x->val.shape[1], H = x->val.shape[2], W = x->val.shape[3];
  if (C % 2 != 0) throw std::invalid_argument("faa: channel count must be even");
  if (H % 2 != 0 || W % 2 != 0)
    throw std::invalid_argument("faa: odd spatial dims (pad upstream)");
  const std::int64_t Ch = C / 2;

  auto xh = ad::slice_channels(t, x, 0, Ch);
  auto xl = ad::slice_channels(t, x, Ch, C);

  // High branch at half resolution.
  Var<T> qh;
  if (qmode == QMode::Scatter) {
    auto emb = ad::scatter_embed(t, xh, bank, /*order=*/1);
    qh = ad::conv2d(t, emb, w.q_proj_w, Var<T>{}, 1, 1, 0, 0, 1);
  } else {
    auto mixed = ad::lfu(t, xh, w.lfu_re, w.lfu_im);
    qh = ad::conv2d(t, mixed, w.q_conv_w, Var<T>{}, 2, 2, 1, 1, 1);
  }
  qh = ad::batch_norm(t, qh, w.q_bn_g, w.q_bn_b, *w.q_bn, train);
  auto kh = ad::batch_norm(t, ad::conv2d(t, xh, w.k_conv_w, Var<T>{}, 2, 2, 1, 1, 1),
                           w.k_bn_g, w.k_bn_b, *w.k_bn, train);
  auto vh = ad::batch_norm(t, ad::conv2d(t, xh, w.v_conv_w, Var<T>{}, 2, 2, 1, 1, 1),
                           w.v_bn_g, w.v_bn_b, *w.v_bn, train);
  auto high = xca(t, qh, kh, vh, w.high_tau, heads);
  auto high_up = ad::bilinear_upsample2(t, high);

  // Low branch at full resolution: one 3x3 embedding producing q,k,v stacked.
  auto tokens = ad::batch_norm(t, ad::conv2d(t, xl, w.low_conv_w, Var<T>{}, 1, 1, 1, 1, 1),
                               w.low_bn_g, w.low_bn_b, *w.low_bn, train);
  auto lq = ad::slice_channels(t, tokens, 0, Ch);
  auto lk = ad::slice_channels(t, tokens, Ch, 2 * Ch);
  auto lv = ad::slice_channels(t, tokens, 2 * Ch, 3 * Ch);
  auto low = xca(t, lq, lk, lv, w.low_tau, heads);

  auto fused = ad::conv2d(t, ad::concat_channels(t, {low, high_up}), w.fuse_w, w.fuse_b,
                          1, 1, 0, 0, 1);
  auto out = ad::add(t, fused, lepe(t, x, w.lepe_w));

  if (capture) {
    capture->high_upsampled = high_up->val;
    capture->low = low->val;
    capture->fused = out->val;
  }
  return out;
}

#define SF_INST_ATTN(T)                                                                 \
  template Var<T> xca<T>(Tape<T>&, Var<T>, Var<T>, Var<T>, Var<T>, int);                \
  template Var<T> lepe<T>(Tape<T>&, Var<T>, Var<T>);                                    \
  template Var<T> faa<T>(Tape<T>&, Var<T>, const FaaWeights<T>&,                        \
                         const wavelets::FilterBank<T>&, int, QMode, bool, FaaCapture<T>*);

SF_INST_ATTN(float)
SF_INST_ATTN(double)
#undef SF_INST_ATTN

}  // namespace sf::attn
