// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the scatterformer authors

// AVX2 variants. Deliberately built from mul/add/sqrt/div only (no FMA), so
// every elementwise kernel rounds exactly like the scalar reference and the
// equivalence tests can assert bit equality. Reductions accumulate in eight
// (four) lanes and may differ from the scalar order by rounding.

#include <immintrin.h>

#include <cmath>

#include "sf/kernels.hpp"

namespace sf::kernels::detail {

namespace {

struct F32 {
  using reg = __m256;
  static constexpr std::size_t W = 8;
  static reg load(const float* p) { return _mm256_loadu_ps(p); }
  static void store(float* p, reg v) { _mm256_storeu_ps(p, v); }
  static reg set1(float v) { return _mm256_set1_ps(v); }
  static reg add(reg a, reg b) { return _mm256_add_ps(a, b); }
  static reg sub(reg a, reg b) { return _mm256_sub_ps(a, b); }
  static reg mul(reg a, reg b) { return _mm256_mul_ps(a, b); }
  static reg div(reg a, reg b) { return _mm256_div_ps(a, b); }
  static reg sqrt(reg a) { return _mm256_sqrt_ps(a); }
  static reg zero() { return _mm256_setzero_ps(); }
  static float hsum(reg v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    lo = _mm_hadd_ps(lo, lo);
    lo = _mm_hadd_ps(lo, lo);
    return _mm_cvtss_f32(lo);
  }
};

struct F64 {
  using reg = __m256d;
  static constexpr std::size_t W = 4;
  static reg load(const double* p) { return _mm256_loadu_pd(p); }
  static void store(double* p, reg v) { _mm256_storeu_pd(p, v); }
  static reg set1(double v) { return _mm256_set1_pd(v); }
  static reg add(reg a, reg b) { return _mm256_add_pd(a, b); }
  static reg sub(reg a, reg b) { return _mm256_sub_pd(a, b); }
  static reg mul(reg a, reg b) { return _mm256_mul_pd(a, b); }
  static reg div(reg a, reg b) { return _mm256_div_pd(a, b); }
  static reg sqrt(reg a) { return _mm256_sqrt_pd(a); }
  static reg zero() { return _mm256_setzero_pd(); }
  static double hsum(reg v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    lo = _mm_add_sd(lo, sh);
    return _mm_cvtsd_f64(lo);
  }
};

template <typename T> struct vec_of;
template <> struct vec_of<float> { using type = F32; };
template <> struct vec_of<double> { using type = F64; };

}  // namespace

template <typename T>
void axpy_avx2(T a, const T* x, T* y, std::size_t n) {
  using V = typename vec_of<T>::type;
  const auto av = V::set1(a);
  std::size_t i = 0;
  for (; i + V::W <= n; i += V::W)
    V::store(y + i, V::add(V::load(y + i), V::mul(av, V::load(x + i))));
  for (; i < n; ++i) y[i] += a * x[i];
}

template <typename T>
void scale_avx2(T a, T* x, std::size_t n) {
  using V = typename vec_of<T>::type;
  const auto av = V::set1(a);
  std::size_t i = 0;
  for (; i + V::W <= n; i += V::W) V::store(x + i, V::mul(av, V::load(x + i)));
  for (; i < n; ++i) x[i] *= a;
}

template <typename T>
void vadd_avx2(const T* a, const T* b, T* out, std::size_t n) {
  using V = typename vec_of<T>::type;
  std::size_t i = 0;
  for (; i + V::W <= n; i += V::W) V::store(out + i, V::add(V::load(a + i), V::load(b + i)));
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

template <typename T>
void vsub_avx2(const T* a, const T* b, T* out, std::size_t n) {
  using V = typename vec_of<T>::type;
  std::size_t i = 0;
  for (; i + V::W <= n; i += V::W) V::store(out + i, V::sub(V::load(a + i), V::load(b + i)));
  for (; i < n; ++i) out[i] = a[i] - b[i];
}

template <typename T>
void vmul_avx2(const T* a, const T* b, T* out, std::size_t n) {
  using V = typename vec_of<T>::type;
  std::size_t i = 0;
  for (; i + V::W <= n; i += V::W) V::store(out + i, V::mul(V::load(a + i), V::load(b + i)));
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

template <typename T>
void cmul_avx2(const T* ar, const T* ai, const T* br, const T* bi,
               T* cr, T* ci, std::size_t n) {
  using V = typename vec_of<T>::type;
  std::size_t i = 0;
  for (; i + V::W <= n; i += V::W) {
    auto xr = V::load(ar + i), xi = V::load(ai + i);
    auto yr = V::load(br + i), yi = V::load(bi + i);
    auto re = V::sub(V::mul(xr, yr), V::mul(xi, yi));
    auto im = V::add(V::mul(xr, yi), V::mul(xi, yr));
    V::store(cr + i, re);
    V::store(ci + i, im);
  }
  for (; i < n; ++i) {
    T re = ar[i] * br[i] - ai[i] * bi[i];
    T im = ar[i] * bi[i] + ai[i] * br[i];
    cr[i] = re;
    ci[i] = im;
  }
}

template <typename T>
void cmul_real_avx2(const T* ar, const T* ai, const T* b,
                    T* cr, T* ci, std::size_t n) {
  using V = typename vec_of<T>::type;
  std::size_t i = 0;
  for (; i + V::W <= n; i += V::W) {
    auto f = V::load(b + i);
    V::store(cr + i, V::mul(V::load(ar + i), f));
    V::store(ci + i, V::mul(V::load(ai + i), f));
  }
  for (; i < n; ++i) {
    cr[i] = ar[i] * b[i];
    ci[i] = ai[i] * b[i];
  }
}

template <typename T>
void cmodulus_avx2(const T* re, const T* im, T* out, std::size_t n) {
  using V = typename vec_of<T>::type;
  std::size_t i = 0;
  for (; i + V::W <= n; i += V::W) {
    auto r = V::load(re + i), m = V::load(im + i);
    V::store(out + i, V::sqrt(V::add(V::mul(r, r), V::mul(m, m))));
  }
  for (; i < n; ++i) out[i] = std::sqrt(re[i] * re[i] + im[i] * im[i]);
}

template <typename T>
T sum_avx2(const T* x, std::size_t n) {
  using V = typename vec_of<T>::type;
  auto acc = V::zero();
  std::size_t i = 0;
  for (; i + V::W <= n; i += V::W) acc = V::add(acc, V::load(x + i));
  T r = V::hsum(acc);
  for (; i < n; ++i) r += x[i];
  return r;
}

template <typename T>
T sumsq_avx2(const T* x, std::size_t n) {
  using V = typename vec_of<T>::type;
  auto acc = V::zero();
  std::size_t i = 0;
  for (; i + V::W <= n; i += V::W) {
    auto v = V::load(x + i);
    acc = V::add(acc, V::mul(v, v));
  }
  T r = V::hsum(acc);
  for (; i < n; ++i) r += x[i] * x[i];
  return r;
}

template <typename T>
T dot_avx2(const T* x, const T* y, std::size_t n) {
  using V = typename vec_of<T>::type;
  auto acc = V::zero();
  std::size_t i = 0;
  for (; i + V::W <= n; i += V::W)
    acc = V::add(acc, V::mul(V::load(x + i), V::load(y + i)));
  T r = V::hsum(acc);
  for (; i < n; ++i) r += x[i] * y[i];
  return r;
}

template <typename T>
void adamw_avx2(T* p, const T* g, T* m, T* v, std::size_t n,
                T lr, T b1, T b2, T eps, T wd, T bc1, T bc2) {
  using V = typename vec_of<T>::type;
  const auto vb1 = V::set1(b1), vb2 = V::set1(b2);
  const auto v1mb1 = V::set1(T(1) - b1), v1mb2 = V::set1(T(1) - b2);
  const auto vbc1 = V::set1(bc1), vbc2 = V::set1(bc2);
  const auto veps = V::set1(eps), vlr = V::set1(lr), vwd = V::set1(wd);
  std::size_t i = 0;
  for (; i + V::W <= n; i += V::W) {
    auto gi = V::load(g + i);
    auto mi = V::add(V::mul(vb1, V::load(m + i)), V::mul(v1mb1, gi));
    auto vi = V::add(V::mul(vb2, V::load(v + i)), V::mul(v1mb2, V::mul(gi, gi)));
    V::store(m + i, mi);
    V::store(v + i, vi);
    auto mh = V::div(mi, vbc1);
    auto vh = V::div(vi, vbc2);
    auto pi = V::load(p + i);
    auto upd = V::add(V::div(mh, V::add(V::sqrt(vh), veps)), V::mul(vwd, pi));
    V::store(p + i, V::sub(pi, V::mul(vlr, upd)));
  }
  if (i < n) adamw_scalar(p + i, g + i, m + i, v + i, n - i, lr, b1, b2, eps, wd, bc1, bc2);
}

template <typename T>
void ema_avx2(T* shadow, const T* p, std::size_t n, T decay) {
  using V = typename vec_of<T>::type;
  const auto omd = V::set1(T(1) - decay);
  const T omd_s = T(1) - decay;
  std::size_t i = 0;
  for (; i + V::W <= n; i += V::W) {
    auto s = V::load(shadow + i);
    V::store(shadow + i, V::add(s, V::mul(omd, V::sub(V::load(p + i), s))));
  }
  for (; i < n; ++i) shadow[i] = shadow[i] + omd_s * (p[i] - shadow[i]);
}

template void axpy_avx2<float>(float, const float*, float*, std::size_t);
template void axpy_avx2<double>(double, const double*, double*, std::size_t);
template void scale_avx2<float>(float, float*, std::size_t);
template void scale_avx2<double>(double, double*, std::size_t);
template void vadd_avx2<float>(const float*, const float*, float*, std::size_t);
template void vadd_avx2<double>(const double*, const double*, double*, std::size_t);
template void vsub_avx2<float>(const float*, const float*, float*, std::size_t);
template void vsub_avx2<double>(const double*, const double*, double*, std::size_t);
template void vmul_avx2<float>(const float*, const float*, float*, std::size_t);
template void vmul_avx2<double>(const double*, const double*, double*, std::size_t);
template void cmul_avx2<float>(const float*, const float*, const float*, const float*,
                               float*, float*, std::size_t);
template void cmul_avx2<double>(const double*, const double*, const double*, const double*,
                                double*, double*, std::size_t);
template void cmul_real_avx2<float>(const float*, const float*, const float*,
                                    float*, float*, std::size_t);
template void cmul_real_avx2<double>(const double*, const double*, const double*,
                                     double*, double*, std::size_t);
template void cmodulus_avx2<float>(const float*, const float*, float*, std::size_t);
template void cmodulus_avx2<double>(const double*, const double*, double*, std::size_t);
template float sum_avx2<float>(const float*, std::size_t);
template double sum_avx2<double>(const double*, std::size_t);
template float sumsq_avx2<float>(const float*, std::size_t);
template double sumsq_avx2<double>(const double*, std::size_t);
template float dot_avx2<float>(const float*, const float*, std::size_t);
template double dot_avx2<double>(const double*, const double*, std::size_t);
template void adamw_avx2<float>(float*, const float*, float*, float*, std::size_t,
                                float, float, float, float, float, float, float);
template void adamw_avx2<double>(double*, const double*, double*, double*, std::size_t,
                                 double, double, double, double, double, double, double);
template void ema_avx2<float>(float*, const float*, std::size_t, float);
template void ema_avx2<double>(double*, const double*, std::size_t, double);

}  // namespace sf::kernels::detail
