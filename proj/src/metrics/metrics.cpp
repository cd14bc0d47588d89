#include "dsatlas/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "dsatlas/error.hpp"
#include "dsatlas/kernels.hpp"

namespace dsatlas {

namespace {

void gaussian_filter(const GrayImage& in, GrayImage& out, const std::vector<float>& taps,
                     int radius, GrayImage& scratch) {
    kern::conv_sym_h(in.data.data(), scratch.data.data(), in.width, in.height, taps.data(), radius);
    kern::conv_sym_v(scratch.data.data(), out.data.data(), in.width, in.height, taps.data(), radius);
}

}  // namespace

SSIMResult ssim(const GrayImage& a, const GrayImage& b, const SSIMParams& params) {
    if (a.width != b.width || a.height != b.height)
        throw Error("ssim: image dimensions differ");
    if (a.size() == 0) throw Error("ssim: empty image");

    int radius = params.window / 2;
    radius = std::min(radius, (std::min(a.width, a.height) - 1) / 2);
    radius = std::max(radius, 0);
    std::vector<float> taps(radius + 1);
    double tap_sum = 0;
    for (int k = 0; k <= radius; ++k) {
        taps[k] = float(std::exp(-0.5 * (double(k) * k) / (params.sigma * params.sigma)));
        tap_sum += (k == 0 ? 1.0 : 2.0) * taps[k];
    }
    for (auto& t : taps) t = float(t / tap_sum);

    const int w = a.width, h = a.height;
    const std::size_t n = a.size();
    GrayImage scratch(w, h), mu_a(w, h), mu_b(w, h), e_aa(w, h), e_bb(w, h), e_ab(w, h);
    GrayImage tmp(w, h);

    gaussian_filter(a, mu_a, taps, radius, scratch);
    gaussian_filter(b, mu_b, taps, radius, scratch);
    kern::multiply(a.data.data(), a.data.data(), tmp.data.data(), n);
    gaussian_filter(tmp, e_aa, taps, radius, scratch);
    kern::multiply(b.data.data(), b.data.data(), tmp.data.data(), n);
    gaussian_filter(tmp, e_bb, taps, radius, scratch);
    kern::multiply(a.data.data(), b.data.data(), tmp.data.data(), n);
    gaussian_filter(tmp, e_ab, taps, radius, scratch);

    const double L = params.dynamic_range;
    const double c1 = (params.k1 * L) * (params.k1 * L);
    const double c2 = (params.k2 * L) * (params.k2 * L);

    // mean over the fully-supported interior
    double acc = 0;
    std::size_t count = 0;
    for (int y = radius; y < h - radius; ++y) {
        for (int x = radius; x < w - radius; ++x) {
            const std::size_t i = std::size_t(y) * w + x;
            const double ma = mu_a.data[i], mb = mu_b.data[i];
            const double va = e_aa.data[i] - ma * ma;
            const double vb = e_bb.data[i] - mb * mb;
            const double vab = e_ab.data[i] - ma * mb;
            const double num = (2 * ma * mb + c1) * (2 * vab + c2);
            const double den = (ma * ma + mb * mb + c1) * (va + vb + c2);
            acc += num / den;
            ++count;
        }
    }
    SSIMResult r;
    r.window = 2 * radius + 1;
    r.k1 = params.k1;
    r.k2 = params.k2;
    r.dynamic_range = L;
    r.mean_ssim = count ? acc / double(count) : 0.0;
    return r;
}

SSIMResult ssim_mask_vs_silhouette(const BinaryMask& fixed, const GrayImage& warped_silhouette,
                                   const SSIMParams& params) {
    const GrayImage f = mask_to_gray(fixed);
    GrayImage s(warped_silhouette.width, warped_silhouette.height, warped_silhouette.spacing);
    for (std::size_t i = 0; i < s.size(); ++i)
        s.data[i] = warped_silhouette.data[i] > 0.5f ? 1.f : 0.f;
    return ssim(f, s, params);
}

TreResult tre(const GroundTruthWarp& truth, const TransformPair& recovered,
              const BinaryMask& region, int grid_stride) {
    if (truth.width != region.width || truth.height != region.height)
        throw Error("tre: ground truth raster and region mask dimensions differ");
    if (grid_stride < 1) throw Error("tre: grid stride must be >= 1");
    recovered.affine.validate();

    // dense recovered displacement, if any
    std::vector<float> rec_dx, rec_dy;
    if (recovered.bspline)
        recovered.bspline->eval_dense(truth.width, truth.height, truth.spacing[0],
                                      truth.spacing[1], rec_dx, rec_dy);

    const double sx = truth.spacing[0], sy = truth.spacing[1];
    double sum = 0, maxe = 0;
    int n = 0;
    for (int y = 0; y < truth.height; y += grid_stride) {
        for (int x = 0; x < truth.width; x += grid_stride) {
            if (!region.at(x, y)) continue;
            const std::size_t i = std::size_t(y) * truth.width + x;
            const double px = x * sx, py = y * sy;

            double tx_mm = px, ty_mm = py;
            if (truth.has_field()) {
                tx_mm += truth.field_dx[i] * sx;
                ty_mm += truth.field_dy[i] * sy;
            }
            double qx_true, qy_true;
            truth.affine.apply(tx_mm, ty_mm, qx_true, qy_true);

            double rx_mm = px, ry_mm = py;
            if (!rec_dx.empty()) {
                rx_mm += rec_dx[i];
                ry_mm += rec_dy[i];
            }
            double qx_rec, qy_rec;
            recovered.affine.apply(rx_mm, ry_mm, qx_rec, qy_rec);

            const double ex = (qx_rec - qx_true) / sx;
            const double ey = (qy_rec - qy_true) / sy;
            const double e = std::sqrt(ex * ex + ey * ey);
            sum += e;
            maxe = std::max(maxe, e);
            ++n;
        }
    }
    if (n == 0) throw Error("tre: no sample points inside the mask");
    return {sum / n, maxe, n};
}

CohortStats cohort_stats(const std::vector<double>& values) {
    if (values.empty()) throw Error("cohort_stats: empty list");
    CohortStats s;
    s.n = int(values.size());
    double sum = 0;
    for (double v : values) {
        if (!(v >= -1.0 && v <= 1.0)) throw Error("cohort_stats: SSIM value outside [-1,1]");
        sum += v;
    }
    s.mean = sum / double(s.n);
    double ss = 0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / double(s.n));

    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t m = sorted.size();
    s.median = (m % 2 == 1) ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);

    for (double v : values) {
        int bin;
        if (v < 0) {
            bin = 0;
            ++s.clamped_negative;
        } else if (v >= 1.0) {
            bin = 99;  // the top edge closes the last bin
        } else {
            bin = int(v * 100.0);
            // a value on an edge falls in the upper bin; edges are the doubles
            // nearest the exact multiples of 0.01
            while (bin < 99 && double(bin + 1) / 100.0 <= v) ++bin;
            while (bin > 0 && double(bin) / 100.0 > v) --bin;
        }
        ++s.histogram[bin];
    }
    s.left_skewed = s.median > s.mean;
    return s;
}

double dice(const BinaryMask& a, const BinaryMask& b) {
    if (a.width != b.width || a.height != b.height)
        throw Error("dice: mask dimensions differ");
    std::size_t inter = 0, ca = 0, cb = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const bool va = a.data[i] != 0, vb = b.data[i] != 0;
        inter += (va && vb) ? 1 : 0;
        ca += va ? 1 : 0;
        cb += vb ? 1 : 0;
    }
    if (ca + cb == 0) return 1.0;
    return 2.0 * double(inter) / double(ca + cb);
}

}  // namespace dsatlas
