// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the scatterformer authors
#include <cmath>

#include "sf/kernels.hpp"

namespace sf::kernels::detail {

template <typename T>
void axpy_scalar(T a, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

template <typename T>
void scale_scalar(T a, T* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

template <typename T>
void vadd_scalar(const T* a, const T* b, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

template <typename T>
void vsub_scalar(const T* a, const T* b, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

template <typename T>
void vmul_scalar(const T* a, const T* b, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

template <typename T>
void cmul_scalar(const T* ar, const T* ai, const T* br, const T* bi,
                 T* cr, T* ci, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    T re = ar[i] * br[i] - ai[i] * bi[i];
    T im = ar[i] * bi[i] + ai[i] * br[i];
    cr[i] = re;
    ci[i] = im;
  }
}

template <typename T>
void cmul_real_scalar(const T* ar, const T* ai, const T* b,
                      T* cr, T* ci, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    cr[i] = ar[i] * b[i];
    ci[i] = ai[i] * b[i];
  }
}

template <typename T>
void cmodulus_scalar(const T* re, const T* im, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::sqrt(re[i] * re[i] + im[i] * im[i]);
}

template <typename T>
T sum_scalar(const T* x, std::size_t n) {
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

template <typename T>
T sumsq_scalar(const T* x, std::size_t n) {
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * x[i];
  return acc;
}

template <typename T>
T dot_scalar(const T* x, const T* y, std::size_t n) {
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

template <typename T>
void adamw_scalar(T* p, const T* g, T* m, T* v, std::size_t n,
                  T lr, T b1, T b2, T eps, T wd, T bc1, T bc2) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = b1 * m[i] + (T(1) - b1) * g[i];
    v[i] = b2 * v[i] + (T(1) - b2) * (g[i] * g[i]);
    T mh = m[i] / bc1;
    T vh = v[i] / bc2;
    p[i] = p[i] - lr * (mh / (std::sqrt(vh) + eps) + wd * p[i]);
  }
}

template <typename T>
void ema_scalar(T* shadow, const T* p, std::size_t n, T decay) {
  // shadow += (1-d)(p - shadow): exactly stationary when shadow == p
  const T omd = T(1) - decay;
  for (std::size_t i = 0; i < n; ++i)
    shadow[i] = shadow[i] + omd * (p[i] - shadow[i]);
}

template void axpy_scalar<float>(float, const float*, float*, std::size_t);
template void axpy_scalar<double>(double, const double*, double*, std::size_t);
template void scale_scalar<float>(float, float*, std::size_t);
template void scale_scalar<double>(double, double*, std::size_t);
template void vadd_scalar<float>(const float*, const float*, float*, std::size_t);
template void vadd_scalar<double>(const double*, const double*, double*, std::size_t);
template void vsub_scalar<float>(const float*, const float*, float*, std::size_t);
template void vsub_scalar<double>(const double*, const double*, double*, std::size_t);
template void vmul_scalar<float>(const float*, const float*, float*, std::size_t);
template void vmul_scalar<double>(const double*, const double*, double*, std::size_t);
template void cmul_scalar<float>(const float*, const float*, const float*, const float*,
                                 float*, float*, std::size_t);
template void cmul_scalar<double>(const double*, const double*, const double*, const double*,
                                  double*, double*, std::size_t);
template void cmul_real_scalar<float>(const float*, const float*, const float*,
                                      float*, float*, std::size_t);
template void cmul_real_scalar<double>(const double*, const double*, const double*,
                                       double*, double*, std::size_t);
template void cmodulus_scalar<float>(const float*, const float*, float*, std::size_t);
template void cmodulus_scalar<double>(const double*, const double*, double*, std::size_t);
template float sum_scalar<float>(const float*, std::size_t);
template double sum_scalar<double>(const double*, std::size_t);
template float sumsq_scalar<float>(const float*, std::size_t);
template double sumsq_scalar<double>(const double*, std::size_t);
template float dot_scalar<float>(const float*, const float*, std::size_t);
template double dot_scalar<double>(const double*, const double*, std::size_t);
template void adamw_scalar<float>(float*, const float*, float*, float*, std::size_t,
                                  float, float, float, float, float, float, float);
template void adamw_scalar<double>(double*, const double*, double*, double*, std::size_t,
                                   double, double, double, double, double, double, double);
template void ema_scalar<float>(float*, const float*, std::size_t, float);
template void ema_scalar<double>(double*, const double*, std::size_t, double);

}  // namespace sf::kernels::detail
