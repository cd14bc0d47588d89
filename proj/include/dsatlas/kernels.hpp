#pragma once

#include <cstddef>
#include <utility>

namespace dsatlas::kern {

// Scalar reference kernels plus AVX2 variants selected once at runtime.
// Elementwise kernels (scale_offset, multiply, accumulate, weighted4,
// bilinear_gather, conv_sym_*) compute the same per-element expression in
// both variants and are bit-identical; reductions (sum) accumulate in a
// different order and are compared with a tolerance in the equivalence
// tests. minmax is exact on NaN-free input, which image invariants
// guarantee.

// Variant resolved by the dispatcher (false = scalar).
bool avx2_active();
// Force the scalar path; DSATLAS_FORCE_SCALAR=1 in the environment does the same.
void set_force_scalar(bool on);

double sum(const float* x, std::size_t n);
std::pair<float, float> minmax(const float* x, std::size_t n);

// y[i] = a * x[i] + b
void scale_offset(const float* x, float a, float b, float* y, std::size_t n);

// y[i] = a[i] * b[i]
void multiply(const float* a, const float* b, float* y, std::size_t n);

// acc[i] += x[i]
void accumulate(double* acc, const float* x, std::size_t n);

// out[i] = w0[i]*c0 + w1[i]*c1 + w2[i]*c2 + w3[i]*c3
void weighted4(const float* w0, const float* w1, const float* w2, const float* w3,
               float c0, float c1, float c2, float c3, float* out, std::size_t n);

// out[i] = a*x[i] + b*y[i] + c
void affine_combine(const float* x, const float* y, float a, float b, float c,
                    float* out, std::size_t n);

// Bilinear sample of img (w x h, row-major) at pixel coordinates
// (xs[i], ys[i]); anything outside [0,w-1]x[0,h-1] (or non-finite) reads 0.
void bilinear_gather(const float* img, int w, int h,
                     const float* xs, const float* ys, float* out, std::size_t n);

// Symmetric FIR along rows / columns with edge clamping. taps[0] is the
// center weight, taps[1..radius] the mirrored pair weights. src and dst
// must not alias.
void conv_sym_h(const float* src, float* dst, int w, int h, const float* taps, int radius);
void conv_sym_v(const float* src, float* dst, int w, int h, const float* taps, int radius);

namespace scalar {
double sum(const float* x, std::size_t n);
std::pair<float, float> minmax(const float* x, std::size_t n);
void scale_offset(const float* x, float a, float b, float* y, std::size_t n);
void multiply(const float* a, const float* b, float* y, std::size_t n);
void accumulate(double* acc, const float* x, std::size_t n);
void weighted4(const float* w0, const float* w1, const float* w2, const float* w3,
               float c0, float c1, float c2, float c3, float* out, std::size_t n);
void affine_combine(const float* x, const float* y, float a, float b, float c,
                    float* out, std::size_t n);
void bilinear_gather(const float* img, int w, int h,
                     const float* xs, const float* ys, float* out, std::size_t n);
void conv_sym_h(const float* src, float* dst, int w, int h, const float* taps, int radius);
void conv_sym_v(const float* src, float* dst, int w, int h, const float* taps, int radius);
}  // namespace scalar

#if defined(DSATLAS_HAVE_AVX2)
namespace avx2 {
double sum(const float* x, std::size_t n);
std::pair<float, float> minmax(const float* x, std::size_t n);
void scale_offset(const float* x, float a, float b, float* y, std::size_t n);
void multiply(const float* a, const float* b, float* y, std::size_t n);
void accumulate(double* acc, const float* x, std::size_t n);
void weighted4(const float* w0, const float* w1, const float* w2, const float* w3,
               float c0, float c1, float c2, float c3, float* out, std::size_t n);
void affine_combine(const float* x, const float* y, float a, float b, float c,
                    float* out, std::size_t n);
void bilinear_gather(const float* img, int w, int h,
                     const float* xs, const float* ys, float* out, std::size_t n);
void conv_sym_h(const float* src, float* dst, int w, int h, const float* taps, int radius);
void conv_sym_v(const float* src, float* dst, int w, int h, const float* taps, int radius);
}  // namespace avx2
#endif

}  // namespace dsatlas::kern
