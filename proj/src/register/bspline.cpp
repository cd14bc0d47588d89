#include "dsatlas/bspline.hpp"

#include <algorithm>
#include <cmath>

#include "dsatlas/error.hpp"
#include "dsatlas/kernels.hpp"

namespace dsatlas {

BSplineField2 BSplineField2::make(double extent_x, double extent_y, int ncells_x, int ncells_y) {
    if (ncells_x < 1 || ncells_y < 1) throw Error("bspline: need at least one cell per axis");
    if (!(extent_x > 0) || !(extent_y > 0)) throw Error("bspline: domain extent must be positive");
    BSplineField2 f;
    f.spacing = {extent_x / ncells_x, extent_y / ncells_y};
    f.origin = {-f.spacing[0], -f.spacing[1]};  // control point 1 anchors the domain start
    f.cols = ncells_x + 3;
    f.rows = ncells_y + 3;
    f.domain_extent = {extent_x, extent_y};
    f.coeffs.assign(2 * std::size_t(f.rows) * f.cols, 0.0);
    return f;
}

void BSplineField2::validate() const {
    if (cols < 4 || rows < 4) throw Error("bspline: grid must be at least 4x4 control points");
    if (coeffs.size() != 2 * std::size_t(rows) * cols)
        throw Error("bspline: coefficient count mismatch");
    for (double c : coeffs)
        if (!std::isfinite(c)) throw Error("bspline: non-finite coefficient");
}

namespace {

// span start index and local coordinate for position x
inline void locate(double x, double origin, double spacing, int cols, int& i0, double& u) {
    const double s = (x - origin) / spacing;
    double base = std::floor(s);
    int i = int(base) - 1;
    i = std::clamp(i, 0, cols - 4);
    i0 = i;
    u = s - (i + 1);
}

}  // namespace

void BSplineField2::displacement_at(double x_mm, double y_mm,
                                    double& out_dx, double& out_dy) const {
    int i0, j0;
    double u, v;
    locate(x_mm, origin[0], spacing[0], cols, i0, u);
    locate(y_mm, origin[1], spacing[1], rows, j0, v);
    double wx[4], wy[4];
    bspline_weights(u, wx);
    bspline_weights(v, wy);
    double ax = 0.0, ay = 0.0;
    for (int j = 0; j < 4; ++j) {
        double rx = 0.0, ry = 0.0;
        for (int i = 0; i < 4; ++i) {
            const std::size_t idx = 2 * (std::size_t(j0 + j) * cols + (i0 + i));
            rx += wx[i] * coeffs[idx];
            ry += wx[i] * coeffs[idx + 1];
        }
        ax += wy[j] * rx;
        ay += wy[j] * ry;
    }
    out_dx = ax;
    out_dy = ay;
}

void BSplineField2::eval_dense(int width, int height, double sx_mm, double sy_mm,
                               std::vector<float>& field_dx, std::vector<float>& field_dy) const {
    field_dx.assign(std::size_t(width) * height, 0.f);
    field_dy.assign(std::size_t(width) * height, 0.f);

    // x-axis span indices and weights are shared by every row
    std::vector<int> ix(width);
    std::vector<std::array<float, 4>> wx(width);
    for (int x = 0; x < width; ++x) {
        double u;
        locate(x * sx_mm, origin[0], spacing[0], cols, ix[x], u);
        double w[4];
        bspline_weights(u, w);
        for (int k = 0; k < 4; ++k) wx[x][k] = float(w[k]);
    }
    // runs of constant span index let the inner loop use broadcast coefficients
    std::vector<std::pair<int, int>> runs;  // [begin, end) pixel ranges
    for (int x = 0; x < width;) {
        int e = x + 1;
        while (e < width && ix[e] == ix[x]) ++e;
        runs.emplace_back(x, e);
        x = e;
    }
    std::vector<float> w0(width), w1(width), w2(width), w3(width);
    for (int x = 0; x < width; ++x) {
        w0[x] = wx[x][0];
        w1[x] = wx[x][1];
        w2[x] = wx[x][2];
        w3[x] = wx[x][3];
    }

    std::vector<double> ex(cols), ey(cols);  // y-collapsed control rows
    for (int y = 0; y < height; ++y) {
        int j0;
        double v;
        locate(y * sy_mm, origin[1], spacing[1], rows, j0, v);
        double wy[4];
        bspline_weights(v, wy);
        for (int i = 0; i < cols; ++i) {
            double ax = 0.0, ay = 0.0;
            for (int j = 0; j < 4; ++j) {
                const std::size_t idx = 2 * (std::size_t(j0 + j) * cols + i);
                ax += wy[j] * coeffs[idx];
                ay += wy[j] * coeffs[idx + 1];
            }
            ex[i] = ax;
            ey[i] = ay;
        }
        float* dst_x = field_dx.data() + std::size_t(y) * width;
        float* dst_y = field_dy.data() + std::size_t(y) * width;
        for (const auto& [b, e] : runs) {
            const int i0 = ix[b];
            const std::size_t n = std::size_t(e - b);
            kern::weighted4(w0.data() + b, w1.data() + b, w2.data() + b, w3.data() + b,
                            float(ex[i0]), float(ex[i0 + 1]), float(ex[i0 + 2]), float(ex[i0 + 3]),
                            dst_x + b, n);
            kern::weighted4(w0.data() + b, w1.data() + b, w2.data() + b, w3.data() + b,
                            float(ey[i0]), float(ey[i0 + 1]), float(ey[i0 + 2]), float(ey[i0 + 3]),
                            dst_y + b, n);
        }
    }
}

BSplineField2 BSplineField2::refined() const {
    validate();
    BSplineField2 f;
    const int ncx = cols - 3, ncy = rows - 3;
    f.spacing = {spacing[0] / 2.0, spacing[1] / 2.0};
    f.origin = {-f.spacing[0], -f.spacing[1]};
    f.cols = 2 * ncx + 3;
    f.rows = 2 * ncy + 3;
    f.domain_extent = domain_extent;
    f.coeffs.assign(2 * std::size_t(f.rows) * f.cols, 0.0);

    // dyadic knot insertion along x into a temporary (old rows kept)
    std::vector<double> tmp(2 * std::size_t(rows) * f.cols, 0.0);
    const auto old_at = [&](int i, int j, int ch) {
        return coeffs[2 * (std::size_t(j) * cols + i) + ch];
    };
    for (int j = 0; j < rows; ++j) {
        for (int ip = 0; ip < f.cols; ++ip) {
            for (int ch = 0; ch < 2; ++ch) {
                double v;
                if (ip % 2 == 1) {  // aligned with old control point i = (ip+1)/2
                    const int i = (ip + 1) / 2;
                    v = (old_at(i - 1, j, ch) + 6.0 * old_at(i, j, ch) + old_at(i + 1, j, ch)) / 8.0;
                } else {  // midpoint between old i and i+1 with i = ip/2
                    const int i = ip / 2;
                    v = (old_at(i, j, ch) + old_at(i + 1, j, ch)) / 2.0;
                }
                tmp[2 * (std::size_t(j) * f.cols + ip) + ch] = v;
            }
        }
    }
    // then along y
    const auto tmp_at = [&](int i, int j, int ch) {
        return tmp[2 * (std::size_t(j) * f.cols + i) + ch];
    };
    for (int jp = 0; jp < f.rows; ++jp) {
        for (int i = 0; i < f.cols; ++i) {
            for (int ch = 0; ch < 2; ++ch) {
                double v;
                if (jp % 2 == 1) {
                    const int j = (jp + 1) / 2;
                    v = (tmp_at(i, j - 1, ch) + 6.0 * tmp_at(i, j, ch) + tmp_at(i, j + 1, ch)) / 8.0;
                } else {
                    const int j = jp / 2;
                    v = (tmp_at(i, j, ch) + tmp_at(i, j + 1, ch)) / 2.0;
                }
                f.coeffs[2 * (std::size_t(jp) * f.cols + i) + ch] = v;
            }
        }
    }
    return f;
}

double BSplineField2::max_abs_coeff() const {
    double m = 0.0;
    for (double c : coeffs) m = std::max(m, std::abs(c));
    return m;
}

}  // namespace dsatlas
