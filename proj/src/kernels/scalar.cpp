#include "dsatlas/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace dsatlas::kern::scalar {

double sum(const float* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

std::pair<float, float> minmax(const float* x, std::size_t n) {
    if (n == 0) return {0.f, 0.f};
    float lo = x[0], hi = x[0];
    for (std::size_t i = 1; i < n; ++i) {
        lo = std::min(lo, x[i]);
        hi = std::max(hi, x[i]);
    }
    return {lo, hi};
}

void scale_offset(const float* x, float a, float b, float* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = a * x[i] + b;
}

void multiply(const float* a, const float* b, float* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = a[i] * b[i];
}

void accumulate(double* acc, const float* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) acc[i] += double(x[i]);
}

void weighted4(const float* w0, const float* w1, const float* w2, const float* w3,
               float c0, float c1, float c2, float c3, float* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        out[i] = w0[i] * c0 + w1[i] * c1 + w2[i] * c2 + w3[i] * c3;
}

void affine_combine(const float* x, const float* y, float a, float b, float c,
                    float* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a * x[i] + b * y[i] + c;
}

void bilinear_gather(const float* img, int w, int h,
                     const float* xs, const float* ys, float* out, std::size_t n) {
    const float xmax = float(w - 1);
    const float ymax = float(h - 1);
    for (std::size_t i = 0; i < n; ++i) {
        const float x = xs[i];
        const float y = ys[i];
        if (!(x >= 0.f && x <= xmax && y >= 0.f && y <= ymax)) {
            out[i] = 0.f;
            continue;
        }
        float x0f = std::floor(x);
        float y0f = std::floor(y);
        x0f = std::max(std::min(x0f, float(w - 2)), 0.f);
        y0f = std::max(std::min(y0f, float(h - 2)), 0.f);
        const float fx = x - x0f;
        const float fy = y - y0f;
        const int x0 = int(x0f);
        const int y0 = int(y0f);
        const float* p = img + std::size_t(y0) * w + x0;
        const float top = p[0] * (1.f - fx) + p[1] * fx;
        const float bot = p[w] * (1.f - fx) + p[w + 1] * fx;
        out[i] = top * (1.f - fy) + bot * fy;
    }
}

void conv_sym_h(const float* src, float* dst, int w, int h, const float* taps, int radius) {
    for (int y = 0; y < h; ++y) {
        const float* s = src + std::size_t(y) * w;
        float* d = dst + std::size_t(y) * w;
        for (int x = 0; x < w; ++x) {
            float acc = taps[0] * s[x];
            for (int k = 1; k <= radius; ++k) {
                const int xl = std::max(x - k, 0);
                const int xr = std::min(x + k, w - 1);
                acc += taps[k] * (s[xl] + s[xr]);
            }
            d[x] = acc;
        }
    }
}

void conv_sym_v(const float* src, float* dst, int w, int h, const float* taps, int radius) {
    for (int y = 0; y < h; ++y) {
        float* d = dst + std::size_t(y) * w;
        const float* c = src + std::size_t(y) * w;
        for (int x = 0; x < w; ++x) d[x] = taps[0] * c[x];
        for (int k = 1; k <= radius; ++k) {
            const float* up = src + std::size_t(std::max(y - k, 0)) * w;
            const float* dn = src + std::size_t(std::min(y + k, h - 1)) * w;
            const float t = taps[k];
            for (int x = 0; x < w; ++x) d[x] += t * (up[x] + dn[x]);
        }
    }
}

}  // namespace dsatlas::kern::scalar
