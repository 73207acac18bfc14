// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the scatterformer authors
#include "sf/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace sf::kernels {

namespace {

bool cpu_has_avx2() {
#if defined(SF_HAVE_AVX2_BUILD) && (defined(__x86_64__) || defined(_M_X64))
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

Backend initial_backend() {
  if (const char* env = std::getenv("SF_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return Backend::Scalar;
    if (std::strcmp(env, "avx2") == 0 && cpu_has_avx2()) return Backend::Avx2;
  }
  return cpu_has_avx2() ? Backend::Avx2 : Backend::Scalar;
}

std::atomic<Backend>& state() {
  static std::atomic<Backend> b{initial_backend()};
  return b;
}

}  // namespace

Backend backend() { return state().load(std::memory_order_relaxed); }

bool avx2_supported() { return cpu_has_avx2(); }

void set_backend(Backend b) {
  if (b == Backend::Avx2 && !cpu_has_avx2())
    throw std::runtime_error("AVX2 backend requested but not supported on this CPU");
  state().store(b, std::memory_order_relaxed);
}

std::string backend_name() {
  return backend() == Backend::Avx2 ? "avx2" : "scalar";
}

#ifdef SF_HAVE_AVX2_BUILD
#define SF_DISPATCH(fn, ...)                              \
  do {                                                    \
    if (backend() == Backend::Avx2)                       \
      return detail::fn##_avx2(__VA_ARGS__);              \
    return detail::fn##_scalar(__VA_ARGS__);              \
  } while (0)
#else
#define SF_DISPATCH(fn, ...) return detail::fn##_scalar(__VA_ARGS__)
#endif

void axpy(float a, const float* x, float* y, std::size_t n) { SF_DISPATCH(axpy, a, x, y, n); }
void axpy(double a, const double* x, double* y, std::size_t n) { SF_DISPATCH(axpy, a, x, y, n); }
void scale(float a, float* x, std::size_t n) { SF_DISPATCH(scale, a, x, n); }
void scale(double a, double* x, std::size_t n) { SF_DISPATCH(scale, a, x, n); }
void vadd(const float* a, const float* b, float* out, std::size_t n) { SF_DISPATCH(vadd, a, b, out, n); }
void vadd(const double* a, const double* b, double* out, std::size_t n) { SF_DISPATCH(vadd, a, b, out, n); }
void vsub(const float* a, const float* b, float* out, std::size_t n) { SF_DISPATCH(vsub, a, b, out, n); }
void vsub(const double* a, const double* b, double* out, std::size_t n) { SF_DISPATCH(vsub, a, b, out, n); }
void vmul(const float* a, const float* b, float* out, std::size_t n) { SF_DISPATCH(vmul, a, b, out, n); }
void vmul(const double* a, const double* b, double* out, std::size_t n) { SF_DISPATCH(vmul, a, b, out, n); }
void cmul(const float* ar, const float* ai, const float* br, const float* bi,
          float* cr, float* ci, std::size_t n) { SF_DISPATCH(cmul, ar, ai, br, bi, cr, ci, n); }
void cmul(const double* ar, const double* ai, const double* br, const double* bi,
          double* cr, double* ci, std::size_t n) { SF_DISPATCH(cmul, ar, ai, br, bi, cr, ci, n); }
void cmul_real(const float* ar, const float* ai, const float* b,
               float* cr, float* ci, std::size_t n) { SF_DISPATCH(cmul_real, ar, ai, b, cr, ci, n); }
void cmul_real(const double* ar, const double* ai, const double* b,
               double* cr, double* ci, std::size_t n) { SF_DISPATCH(cmul_real, ar, ai, b, cr, ci, n); }
void cmodulus(const float* re, const float* im, float* out, std::size_t n) { SF_DISPATCH(cmodulus, re, im, out, n); }
void cmodulus(const double* re, const double* im, double* out, std::size_t n) { SF_DISPATCH(cmodulus, re, im, out, n); }
float sum(const float* x, std::size_t n) { SF_DISPATCH(sum, x, n); }
double sum(const double* x, std::size_t n) { SF_DISPATCH(sum, x, n); }
float sumsq(const float* x, std::size_t n) { SF_DISPATCH(sumsq, x, n); }
double sumsq(const double* x, std::size_t n) { SF_DISPATCH(sumsq, x, n); }
float dot(const float* x, const float* y, std::size_t n) { SF_DISPATCH(dot, x, y, n); }
double dot(const double* x, const double* y, std::size_t n) { SF_DISPATCH(dot, x, y, n); }
void adamw(float* p, const float* g, float* m, float* v, std::size_t n,
           float lr, float b1, float b2, float eps, float wd, float bc1, float bc2) {
  SF_DISPATCH(adamw, p, g, m, v, n, lr, b1, b2, eps, wd, bc1, bc2);
}
void adamw(double* p, const double* g, double* m, double* v, std::size_t n,
           double lr, double b1, double b2, double eps, double wd, double bc1, double bc2) {
  SF_DISPATCH(adamw, p, g, m, v, n, lr, b1, b2, eps, wd, bc1, bc2);
}
void ema(float* shadow, const float* p, std::size_t n, float decay) { SF_DISPATCH(ema, shadow, p, n, decay); }
void ema(double* shadow, const double* p, std::size_t n, double decay) { SF_DISPATCH(ema, shadow, p, n, decay); }

#undef SF_DISPATCH

}  // namespace sf::kernels
