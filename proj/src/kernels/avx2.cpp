#include "dsatlas/kernels.hpp"

#if defined(DSATLAS_HAVE_AVX2)

#include <immintrin.h>

#include <algorithm>
#include <cmath>

// Per-element arithmetic mirrors the scalar kernels exactly: plain
// mul/add, no FMA, so the two variants stay bit-identical where the
// equivalence tests assert it.

namespace dsatlas::kern::avx2 {

double sum(const float* x, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 v = _mm256_loadu_ps(x + i);
        acc0 = _mm256_add_pd(acc0, _mm256_cvtps_pd(_mm256_castps256_ps128(v)));
        acc1 = _mm256_add_pd(acc1, _mm256_cvtps_pd(_mm256_extractf128_ps(v, 1)));
    }
    const __m256d acc = _mm256_add_pd(acc0, acc1);
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    double total = lanes[0] + lanes[1] + lanes[2] + lanes[3];
    for (; i < n; ++i) total += x[i];
    return total;
}

std::pair<float, float> minmax(const float* x, std::size_t n) {
    if (n == 0) return {0.f, 0.f};
    if (n < 8) return scalar::minmax(x, n);
    __m256 vlo = _mm256_loadu_ps(x);
    __m256 vhi = vlo;
    std::size_t i = 8;
    for (; i + 8 <= n; i += 8) {
        const __m256 v = _mm256_loadu_ps(x + i);
        vlo = _mm256_min_ps(vlo, v);
        vhi = _mm256_max_ps(vhi, v);
    }
    alignas(32) float lo8[8], hi8[8];
    _mm256_store_ps(lo8, vlo);
    _mm256_store_ps(hi8, vhi);
    float lo = lo8[0], hi = hi8[0];
    for (int k = 1; k < 8; ++k) {
        lo = std::min(lo, lo8[k]);
        hi = std::max(hi, hi8[k]);
    }
    for (; i < n; ++i) {
        lo = std::min(lo, x[i]);
        hi = std::max(hi, x[i]);
    }
    return {lo, hi};
}

void scale_offset(const float* x, float a, float b, float* y, std::size_t n) {
    const __m256 va = _mm256_set1_ps(a);
    const __m256 vb = _mm256_set1_ps(b);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 v = _mm256_loadu_ps(x + i);
        _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_mul_ps(va, v), vb));
    }
    for (; i < n; ++i) y[i] = a * x[i] + b;
}

void multiply(const float* a, const float* b, float* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 va = _mm256_loadu_ps(a + i);
        const __m256 vb = _mm256_loadu_ps(b + i);
        _mm256_storeu_ps(y + i, _mm256_mul_ps(va, vb));
    }
    for (; i < n; ++i) y[i] = a[i] * b[i];
}

void accumulate(double* acc, const float* x, std::size_t n) {
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 v = _mm256_loadu_ps(x + i);
        const __m256d lo = _mm256_cvtps_pd(_mm256_castps256_ps128(v));
        const __m256d hi = _mm256_cvtps_pd(_mm256_extractf128_ps(v, 1));
        _mm256_storeu_pd(acc + i, _mm256_add_pd(_mm256_loadu_pd(acc + i), lo));
        _mm256_storeu_pd(acc + i + 4, _mm256_add_pd(_mm256_loadu_pd(acc + i + 4), hi));
    }
    for (; i < n; ++i) acc[i] += double(x[i]);
}

void weighted4(const float* w0, const float* w1, const float* w2, const float* w3,
               float c0, float c1, float c2, float c3, float* out, std::size_t n) {
    const __m256 v0 = _mm256_set1_ps(c0);
    const __m256 v1 = _mm256_set1_ps(c1);
    const __m256 v2 = _mm256_set1_ps(c2);
    const __m256 v3 = _mm256_set1_ps(c3);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 acc = _mm256_mul_ps(_mm256_loadu_ps(w0 + i), v0);
        acc = _mm256_add_ps(acc, _mm256_mul_ps(_mm256_loadu_ps(w1 + i), v1));
        acc = _mm256_add_ps(acc, _mm256_mul_ps(_mm256_loadu_ps(w2 + i), v2));
        acc = _mm256_add_ps(acc, _mm256_mul_ps(_mm256_loadu_ps(w3 + i), v3));
        _mm256_storeu_ps(out + i, acc);
    }
    for (; i < n; ++i)
        out[i] = w0[i] * c0 + w1[i] * c1 + w2[i] * c2 + w3[i] * c3;
}

void affine_combine(const float* x, const float* y, float a, float b, float c,
                    float* out, std::size_t n) {
    const __m256 va = _mm256_set1_ps(a);
    const __m256 vb = _mm256_set1_ps(b);
    const __m256 vc = _mm256_set1_ps(c);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 vx = _mm256_mul_ps(va, _mm256_loadu_ps(x + i));
        const __m256 vy = _mm256_mul_ps(vb, _mm256_loadu_ps(y + i));
        _mm256_storeu_ps(out + i, _mm256_add_ps(_mm256_add_ps(vx, vy), vc));
    }
    for (; i < n; ++i) out[i] = a * x[i] + b * y[i] + c;
}

void bilinear_gather(const float* img, int w, int h,
                     const float* xs, const float* ys, float* out, std::size_t n) {
    const __m256 vzero = _mm256_setzero_ps();
    const __m256 vone = _mm256_set1_ps(1.f);
    const __m256 vxmax = _mm256_set1_ps(float(w - 1));
    const __m256 vymax = _mm256_set1_ps(float(h - 1));
    const __m256 vxclamp = _mm256_set1_ps(float(w - 2));
    const __m256 vyclamp = _mm256_set1_ps(float(h - 2));
    const __m256i vw = _mm256_set1_epi32(w);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 x = _mm256_loadu_ps(xs + i);
        const __m256 y = _mm256_loadu_ps(ys + i);
        __m256 valid = _mm256_and_ps(_mm256_cmp_ps(x, vzero, _CMP_GE_OQ),
                                     _mm256_cmp_ps(x, vxmax, _CMP_LE_OQ));
        valid = _mm256_and_ps(valid, _mm256_cmp_ps(y, vzero, _CMP_GE_OQ));
        valid = _mm256_and_ps(valid, _mm256_cmp_ps(y, vymax, _CMP_LE_OQ));
        if (_mm256_testz_ps(valid, valid)) {
            _mm256_storeu_ps(out + i, vzero);
            continue;
        }
        __m256 x0f = _mm256_floor_ps(x);
        __m256 y0f = _mm256_floor_ps(y);
        x0f = _mm256_max_ps(_mm256_min_ps(x0f, vxclamp), vzero);
        y0f = _mm256_max_ps(_mm256_min_ps(y0f, vyclamp), vzero);
        const __m256 fx = _mm256_sub_ps(x, x0f);
        const __m256 fy = _mm256_sub_ps(y, y0f);
        // invalid lanes gather from index 0 and are masked afterwards
        __m256i idx = _mm256_add_epi32(_mm256_mullo_epi32(_mm256_cvttps_epi32(y0f), vw),
                                       _mm256_cvttps_epi32(x0f));
        idx = _mm256_and_si256(idx, _mm256_castps_si256(valid));
        const __m256 v00 = _mm256_i32gather_ps(img, idx, 4);
        const __m256 v01 = _mm256_i32gather_ps(img + 1, idx, 4);
        const __m256 v10 = _mm256_i32gather_ps(img + w, idx, 4);
        const __m256 v11 = _mm256_i32gather_ps(img + w + 1, idx, 4);
        const __m256 gx = _mm256_sub_ps(vone, fx);
        const __m256 gy = _mm256_sub_ps(vone, fy);
        const __m256 top = _mm256_add_ps(_mm256_mul_ps(v00, gx), _mm256_mul_ps(v01, fx));
        const __m256 bot = _mm256_add_ps(_mm256_mul_ps(v10, gx), _mm256_mul_ps(v11, fx));
        const __m256 val = _mm256_add_ps(_mm256_mul_ps(top, gy), _mm256_mul_ps(bot, fy));
        _mm256_storeu_ps(out + i, _mm256_and_ps(val, valid));
    }
    if (i < n) scalar::bilinear_gather(img, w, h, xs + i, ys + i, out + i, n - i);
}

void conv_sym_h(const float* src, float* dst, int w, int h, const float* taps, int radius) {
    if (w <= 2 * radius + 8) {
        scalar::conv_sym_h(src, dst, w, h, taps, radius);
        return;
    }
    for (int y = 0; y < h; ++y) {
        const float* s = src + std::size_t(y) * w;
        float* d = dst + std::size_t(y) * w;
        // clamped edges take the scalar expression
        for (int x = 0; x < radius; ++x) {
            float acc = taps[0] * s[x];
            for (int k = 1; k <= radius; ++k)
                acc += taps[k] * (s[std::max(x - k, 0)] + s[std::min(x + k, w - 1)]);
            d[x] = acc;
        }
        for (int x = w - radius; x < w; ++x) {
            float acc = taps[0] * s[x];
            for (int k = 1; k <= radius; ++k)
                acc += taps[k] * (s[std::max(x - k, 0)] + s[std::min(x + k, w - 1)]);
            d[x] = acc;
        }
        int x = radius;
        const int xend = w - radius;
        for (; x + 8 <= xend; x += 8) {
            __m256 acc = _mm256_mul_ps(_mm256_set1_ps(taps[0]), _mm256_loadu_ps(s + x));
            for (int k = 1; k <= radius; ++k) {
                const __m256 l = _mm256_loadu_ps(s + x - k);
                const __m256 r = _mm256_loadu_ps(s + x + k);
                acc = _mm256_add_ps(acc, _mm256_mul_ps(_mm256_set1_ps(taps[k]),
                                                       _mm256_add_ps(l, r)));
            }
            _mm256_storeu_ps(d + x, acc);
        }
        for (; x < xend; ++x) {
            float acc = taps[0] * s[x];
            for (int k = 1; k <= radius; ++k)
                acc += taps[k] * (s[x - k] + s[x + k]);
            d[x] = acc;
        }
    }
}

void conv_sym_v(const float* src, float* dst, int w, int h, const float* taps, int radius) {
    if (radius > 8) {
        scalar::conv_sym_v(src, dst, w, h, taps, radius);
        return;
    }
    for (int y = 0; y < h; ++y) {
        float* d = dst + std::size_t(y) * w;
        const float* rows[2 * 8 + 1];
        // gather clamped source rows once per output row
        const int kmax = radius;
        rows[0] = src + std::size_t(y) * w;
        for (int k = 1; k <= kmax; ++k) {
            rows[2 * k - 1] = src + std::size_t(std::max(y - k, 0)) * w;
            rows[2 * k] = src + std::size_t(std::min(y + k, h - 1)) * w;
        }
        int x = 0;
        for (; x + 8 <= w; x += 8) {
            __m256 acc = _mm256_mul_ps(_mm256_set1_ps(taps[0]), _mm256_loadu_ps(rows[0] + x));
            for (int k = 1; k <= kmax; ++k) {
                const __m256 up = _mm256_loadu_ps(rows[2 * k - 1] + x);
                const __m256 dn = _mm256_loadu_ps(rows[2 * k] + x);
                acc = _mm256_add_ps(acc, _mm256_mul_ps(_mm256_set1_ps(taps[k]),
                                                       _mm256_add_ps(up, dn)));
            }
            _mm256_storeu_ps(d + x, acc);
        }
        for (; x < w; ++x) {
            float acc = taps[0] * rows[0][x];
            for (int k = 1; k <= kmax; ++k)
                acc += taps[k] * (rows[2 * k - 1][x] + rows[2 * k][x]);
            d[x] = acc;
        }
    }
}

}  // namespace dsatlas::kern::avx2

#endif  // DSATLAS_HAVE_AVX2
