#include "dsatlas/kernels.hpp"

#include <cmath>
#include <cstdlib>

namespace dsatlas::kern {

namespace {

struct Ops {
    double (*sum)(const float*, std::size_t);
    std::pair<float, float> (*minmax)(const float*, std::size_t);
    void (*scale_offset)(const float*, float, float, float*, std::size_t);
    void (*multiply)(const float*, const float*, float*, std::size_t);
    void (*accumulate)(double*, const float*, std::size_t);
    void (*weighted4)(const float*, const float*, const float*, const float*,
                      float, float, float, float, float*, std::size_t);
    void (*affine_combine)(const float*, const float*, float, float, float,
                           float*, std::size_t);
    void (*bilinear_gather)(const float*, int, int, const float*, const float*,
                            float*, std::size_t);
    void (*conv_sym_h)(const float*, float*, int, int, const float*, int);
    void (*conv_sym_v)(const float*, float*, int, int, const float*, int);
    bool is_avx2 = false;
};

bool g_force_scalar = false;

Ops resolve() {
    Ops o{scalar::sum, scalar::minmax, scalar::scale_offset, scalar::multiply,
          scalar::accumulate, scalar::weighted4, scalar::affine_combine,
          scalar::bilinear_gather, scalar::conv_sym_h, scalar::conv_sym_v, false};
    if (g_force_scalar) return o;
    if (const char* env = std::getenv("DSATLAS_FORCE_SCALAR"); env && env[0] == '1') return o;
#if defined(DSATLAS_HAVE_AVX2)
    if (__builtin_cpu_supports("avx2")) {
        o = {avx2::sum, avx2::minmax, avx2::scale_offset, avx2::multiply,
             avx2::accumulate, avx2::weighted4, avx2::affine_combine,
             avx2::bilinear_gather, avx2::conv_sym_h, avx2::conv_sym_v, true};
    }
#endif
    return o;
}

Ops g_ops = resolve();

}  // namespace

bool avx2_active() { return g_ops.is_avx2; }

void set_force_scalar(bool on) {
    g_force_scalar = on;
    g_ops = resolve();
}

double sum(const float* x, std::size_t n) { return g_ops.sum(x, n); }

std::pair<float, float> minmax(const float* x, std::size_t n) { return g_ops.minmax(x, n); }

void scale_offset(const float* x, float a, float b, float* y, std::size_t n) {
    g_ops.scale_offset(x, a, b, y, n);
}

void multiply(const float* a, const float* b, float* y, std::size_t n) {
    g_ops.multiply(a, b, y, n);
}

void accumulate(double* acc, const float* x, std::size_t n) { g_ops.accumulate(acc, x, n); }

void weighted4(const float* w0, const float* w1, const float* w2, const float* w3,
               float c0, float c1, float c2, float c3, float* out, std::size_t n) {
    g_ops.weighted4(w0, w1, w2, w3, c0, c1, c2, c3, out, n);
}

void affine_combine(const float* x, const float* y, float a, float b, float c,
                    float* out, std::size_t n) {
    g_ops.affine_combine(x, y, a, b, c, out, n);
}

void bilinear_gather(const float* img, int w, int h,
                     const float* xs, const float* ys, float* out, std::size_t n) {
    if (w < 2 || h < 2) {
        // degenerate raster: nearest sample, same in every variant
        for (std::size_t i = 0; i < n; ++i) {
            const float x = xs[i];
            const float y = ys[i];
            if (!(x >= 0.f && x <= float(w - 1) && y >= 0.f && y <= float(h - 1))) {
                out[i] = 0.f;
                continue;
            }
            const int ix = int(std::lround(x));
            const int iy = int(std::lround(y));
            out[i] = img[std::size_t(iy) * w + ix];
        }
        return;
    }
    g_ops.bilinear_gather(img, w, h, xs, ys, out, n);
}

void conv_sym_h(const float* src, float* dst, int w, int h, const float* taps, int radius) {
    g_ops.conv_sym_h(src, dst, w, h, taps, radius);
}

void conv_sym_v(const float* src, float* dst, int w, int h, const float* taps, int radius) {
    g_ops.conv_sym_v(src, dst, w, h, taps, radius);
}

}  // namespace dsatlas::kern
