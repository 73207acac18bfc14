// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the scatterformer authors
#pragma once

#include <cstdint>

#include "sf/tensor.hpp"

// Unitary-convention FFTs: both directions scale by 1/sqrt(n), so
// round-trips are exact up to rounding and Parseval holds as an equality.
// Power-of-two lengths use an iterative radix-2 kernel with cached twiddle
// tables; other lengths fall back to Bluestein's chirp-z algorithm.

namespace sf::fft {

bool is_pow2(std::int64_t n);
std::int64_t next_pow2(std::int64_t n);

template <typename T>
void fft1d(T* re, T* im, std::int64_t n, bool inverse);

// In-place 2-D transform over shape (h, w).
template <typename T>
void fft2_inplace(ComplexTensor<T>& x, bool inverse);

// Real input, power-of-two dims required. With pad_to_pow2 the input is
// zero-padded up to the next power of two per dimension; otherwise non
// power-of-two dims are rejected.
template <typename T>
ComplexTensor<T> fft2(const Tensor<T>& x, bool pad_to_pow2 = false);

template <typename T>
ComplexTensor<T> fft2c(const ComplexTensor<T>& x);

template <typename T>
ComplexTensor<T> ifft2(const ComplexTensor<T>& x);

template <typename T>
Tensor<T> ifft2_real(const ComplexTensor<T>& x);

// Circular convolution with a frequency-domain filter (transfer-function
// convention): ifft2(fft2(x) * filter_hat). An all-ones filter_hat is the
// identity. To convolve with a spatial kernel h use transfer_of_kernel(h).
template <typename T>
ComplexTensor<T> conv2d_fft(const Tensor<T>& x, const ComplexTensor<T>& filter_hat);

// sqrt(h*w) * fft2(h): the transfer function whose conv2d_fft equals the
// direct circular convolution with kernel h.
template <typename T>
ComplexTensor<T> transfer_of_kernel(const Tensor<T>& h);

// Spectrum of the spatially subsampled signal: folding the (h, w) spectrum
// by (kh, kw) and inverse-transforming yields exactly x[kh*i, kw*j].
template <typename T>
ComplexTensor<T> fold_spectrum(const ComplexTensor<T>& x, int kh, int kw);

// Adjoint of fold_spectrum; also the spectrum of zero-upsampling.
template <typename T>
ComplexTensor<T> tile_spectrum(const ComplexTensor<T>& x, int kh, int kw, std::int64_t H, std::int64_t W);

}  // namespace sf::fft
