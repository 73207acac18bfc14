// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the scatterformer authors
#pragma once

#include <cstddef>
#include <string>

// Data-parallel inner loops used by the FFT/convolution core, the autodiff
// ops and the optimizer. Every kernel has a scalar reference implementation
// and an AVX2 variant; the backend is picked once at startup from CPUID and
// can be overridden (env SF_KERNELS=scalar|avx2 or set_backend) for the
// equivalence tests. Elementwise kernels are bit-identical across backends
// (no FMA contraction anywhere); reductions may differ by rounding only.

namespace sf::kernels {

enum class Backend { Scalar, Avx2 };

Backend backend();
void set_backend(Backend b);  // throws if unsupported on this CPU
bool avx2_supported();
std::string backend_name();

// y += a * x
void axpy(float a, const float* x, float* y, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);

// x *= a
void scale(float a, float* x, std::size_t n);
void scale(double a, double* x, std::size_t n);

// out = a + b / out = a - b / out = a * b   (out may alias a or b)
void vadd(const float* a, const float* b, float* out, std::size_t n);
void vadd(const double* a, const double* b, double* out, std::size_t n);
void vsub(const float* a, const float* b, float* out, std::size_t n);
void vsub(const double* a, const double* b, double* out, std::size_t n);
void vmul(const float* a, const float* b, float* out, std::size_t n);
void vmul(const double* a, const double* b, double* out, std::size_t n);

// (cr, ci) = (ar, ai) * (br, bi), split complex
void cmul(const float* ar, const float* ai, const float* br, const float* bi,
          float* cr, float* ci, std::size_t n);
void cmul(const double* ar, const double* ai, const double* br, const double* bi,
          double* cr, double* ci, std::size_t n);

// (cr, ci) = (ar, ai) * b, split complex times real
void cmul_real(const float* ar, const float* ai, const float* b,
               float* cr, float* ci, std::size_t n);
void cmul_real(const double* ar, const double* ai, const double* b,
               double* cr, double* ci, std::size_t n);

// out = sqrt(re*re + im*im)
void cmodulus(const float* re, const float* im, float* out, std::size_t n);
void cmodulus(const double* re, const double* im, double* out, std::size_t n);

float sum(const float* x, std::size_t n);
double sum(const double* x, std::size_t n);
float sumsq(const float* x, std::size_t n);
double sumsq(const double* x, std::size_t n);
float dot(const float* x, const float* y, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);

// Fused AdamW update with decoupled weight decay. bc1 = 1 - beta1^t,
// bc2 = 1 - beta2^t are the bias-correction denominators.
void adamw(float* p, const float* g, float* m, float* v, std::size_t n,
           float lr, float beta1, float beta2, float eps, float wd,
           float bc1, float bc2);
void adamw(double* p, const double* g, double* m, double* v, std::size_t n,
           double lr, double beta1, double beta2, double eps, double wd,
           double bc1, double bc2);

// shadow = decay * shadow + (1 - decay) * p
void ema(float* shadow, const float* p, std::size_t n, float decay);
void ema(double* shadow, const double* p, std::size_t n, double decay);

namespace detail {

// Scalar reference implementations (always built).
template <typename T> void axpy_scalar(T a, const T* x, T* y, std::size_t n);
template <typename T> void scale_scalar(T a, T* x, std::size_t n);
template <typename T> void vadd_scalar(const T* a, const T* b, T* out, std::size_t n);
template <typename T> void vsub_scalar(const T* a, const T* b, T* out, std::size_t n);
template <typename T> void vmul_scalar(const T* a, const T* b, T* out, std::size_t n);
template <typename T> void cmul_scalar(const T* ar, const T* ai, const T* br, const T* bi,
                                       T* cr, T* ci, std::size_t n);
template <typename T> void cmul_real_scalar(const T* ar, const T* ai, const T* b,
                                            T* cr, T* ci, std::size_t n);
template <typename T> void cmodulus_scalar(const T* re, const T* im, T* out, std::size_t n);
template <typename T> T sum_scalar(const T* x, std::size_t n);
template <typename T> T sumsq_scalar(const T* x, std::size_t n);
template <typename T> T dot_scalar(const T* x, const T* y, std::size_t n);
template <typename T> void adamw_scalar(T* p, const T* g, T* m, T* v, std::size_t n,
                                        T lr, T b1, T b2, T eps, T wd, T bc1, T bc2);
template <typename T> void ema_scalar(T* shadow, const T* p, std::size_t n, T decay);

#ifdef SF_HAVE_AVX2_BUILD
template <typename T> void axpy_avx2(T a, const T* x, T* y, std::size_t n);
template <typename T> void scale_avx2(T a, T* x, std::size_t n);
template <typename T> void vadd_avx2(const T* a, const T* b, T* out, std::size_t n);
template <typename T> void vsub_avx2(const T* a, const T* b, T* out, std::size_t n);
template <typename T> void vmul_avx2(const T* a, const T* b, T* out, std::size_t n);
template <typename T> void cmul_avx2(const T* ar, const T* ai, const T* br, const T* bi,
                                     T* cr, T* ci, std::size_t n);
template <typename T> void cmul_real_avx2(const T* ar, const T* ai, const T* b,
                                          T* cr, T* ci, std::size_t n);
template <typename T> void cmodulus_avx2(const T* re, const T* im, T* out, std::size_t n);
template <typename T> T sum_avx2(const T* x, std::size_t n);
template <typename T> T sumsq_avx2(const T* x, std::size_t n);
template <typename T> T dot_avx2(const T* x, const T* y, std::size_t n);
template <typename T> void adamw_avx2(T* p, const T* g, T* m, T* v, std::size_t n,
                                      T lr, T b1, T b2, T eps, T wd, T bc1, T bc2);
template <typename T> void ema_avx2(T* shadow, const T* p, std::size_t n, T decay);
#endif

}  // namespace detail
}  // namespace sf::kernels
