#include "dsatlas/registration.hpp"

#include <algorithm>
#include <cmath>

#include "dsatlas/error.hpp"
#include "dsatlas/kernels.hpp"
#include "dsatlas/mi_accumulator.hpp"
#include "dsatlas/optimizer.hpp"

namespace dsatlas {

double Affine2::rotation_deg() const {
    return std::atan2(a21 - a12, a11 + a22) * 180.0 / 3.14159265358979323846;
}

void Affine2::validate() const {
    if (std::abs(det()) < 1e-12) throw Error("affine transform is singular");
}

void RegistrationConfig::validate() const {
    if (resolutions_affine < 1 || resolutions_bspline < 1)
        throw Error("registration: resolution counts must be >= 1");
    if (!(max_step_length > 0)) throw Error("registration: max_step_length must be > 0");
    if (histogram_bins < 2) throw Error("registration: need >= 2 histogram bins");
    if (lbfgs_memory < 1 || max_iterations_per_level < 1)
        throw Error("registration: optimizer counts must be >= 1");
    if (!(convergence_tol > 0)) throw Error("registration: convergence_tol must be > 0");
}

namespace {

GrayImage downsample2(const GrayImage& in) {
    static const float taps[3] = {0.375f, 0.25f, 0.0625f};  // binomial [1 4 6 4 1]/16
    GrayImage t1(in.width, in.height, in.spacing);
    GrayImage t2(in.width, in.height, in.spacing);
    kern::conv_sym_h(in.data.data(), t1.data.data(), in.width, in.height, taps, 2);
    kern::conv_sym_v(t1.data.data(), t2.data.data(), in.width, in.height, taps, 2);
    const int nw = (in.width + 1) / 2, nh = (in.height + 1) / 2;
    GrayImage out(nw, nh, {in.spacing[0] * 2.0, in.spacing[1] * 2.0});
    for (int y = 0; y < nh; ++y)
        for (int x = 0; x < nw; ++x) out.at(x, y) = t2.at(2 * x, 2 * y);
    return out;
}

std::vector<float> index_ramp(int n) {
    std::vector<float> r(n);
    for (int i = 0; i < n; ++i) r[i] = float(i);
    return r;
}

// fixed-grid -> moving-pixel coordinates through the affine only
void affine_rows(const Affine2& A, const FixedGrid& grid, const GrayImage& moving,
                 const float* ramp, int y, float* xs, float* ys) {
    const double sxm = moving.spacing[0], sym = moving.spacing[1];
    const double ymm = y * grid.spacing[1];
    const double kx = A.a11 * grid.spacing[0] / sxm;
    const double bx = (A.a12 * (ymm - A.cy) + A.cx + A.tx - A.a11 * A.cx) / sxm;
    const double ky = A.a21 * grid.spacing[0] / sym;
    const double by = (A.a22 * (ymm - A.cy) + A.cy + A.ty - A.a21 * A.cx) / sym;
    kern::scale_offset(ramp, float(kx), float(bx), xs, grid.width);
    kern::scale_offset(ramp, float(ky), float(by), ys, grid.width);
}

bool weighted_centroid(const GrayImage& img, float thresh, double& mx, double& my) {
    double sx = 0, sy = 0, n = 0;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            if (img.at(x, y) > thresh) {
                sx += x * img.spacing[0];
                sy += y * img.spacing[1];
                n += 1;
            }
    if (n == 0) return false;
    mx = sx / n;
    my = sy / n;
    return true;
}

}  // namespace

std::vector<GrayImage> gaussian_pyramid(const GrayImage& img, int max_levels, int min_dim) {
    std::vector<GrayImage> fine_first{img};
    while (int(fine_first.size()) < max_levels) {
        const auto& b = fine_first.back();
        const int nw = (b.width + 1) / 2, nh = (b.height + 1) / 2;
        if (std::min(nw, nh) < min_dim) break;
        fine_first.push_back(downsample2(b));
    }
    std::reverse(fine_first.begin(), fine_first.end());
    return fine_first;
}

GrayImage apply_affine(const GrayImage& moving, const Affine2& affine, const FixedGrid& grid) {
    affine.validate();
    GrayImage out(grid.width, grid.height, grid.spacing);
    const auto ramp = index_ramp(grid.width);
    std::vector<float> xs(grid.width), ys(grid.width);
    for (int y = 0; y < grid.height; ++y) {
        affine_rows(affine, grid, moving, ramp.data(), y, xs.data(), ys.data());
        kern::bilinear_gather(moving.data.data(), moving.width, moving.height,
                              xs.data(), ys.data(), out.data.data() + std::size_t(y) * grid.width,
                              grid.width);
    }
    return out;
}

GrayImage apply_transform(const GrayImage& moving, const TransformPair& pair,
                          const FixedGrid& grid) {
    if (!pair.bspline) return apply_affine(moving, pair.affine, grid);
    pair.affine.validate();
    const Affine2& A = pair.affine;
    const double sxm = moving.spacing[0], sym = moving.spacing[1];

    std::vector<float> dxf, dyf;
    pair.bspline->eval_dense(grid.width, grid.height, grid.spacing[0], grid.spacing[1], dxf, dyf);

    GrayImage out(grid.width, grid.height, grid.spacing);
    std::vector<float> ramp_mm(grid.width);
    for (int i = 0; i < grid.width; ++i) ramp_mm[i] = float(i * grid.spacing[0]);
    std::vector<float> px(grid.width), py(grid.width), xs(grid.width), ys(grid.width);
    const float cst_x = float(A.cx + A.tx - A.a11 * A.cx - A.a12 * A.cy);
    const float cst_y = float(A.cy + A.ty - A.a21 * A.cx - A.a22 * A.cy);
    for (int y = 0; y < grid.height; ++y) {
        const float* dxr = dxf.data() + std::size_t(y) * grid.width;
        const float* dyr = dyf.data() + std::size_t(y) * grid.width;
        kern::affine_combine(ramp_mm.data(), dxr, 1.f, 1.f, 0.f, px.data(), grid.width);
        kern::scale_offset(dyr, 1.f, float(y * grid.spacing[1]), py.data(), grid.width);
        kern::affine_combine(px.data(), py.data(), float(A.a11 / sxm), float(A.a12 / sxm),
                             cst_x / float(sxm), xs.data(), grid.width);
        kern::affine_combine(px.data(), py.data(), float(A.a21 / sym), float(A.a22 / sym),
                             cst_y / float(sym), ys.data(), grid.width);
        kern::bilinear_gather(moving.data.data(), moving.width, moving.height,
                              xs.data(), ys.data(), out.data.data() + std::size_t(y) * grid.width,
                              grid.width);
    }
    return out;
}

std::vector<double> estimate_scales(TransformKind kind, const FixedGrid& fixed,
                                    std::size_t n_params, bool auto_scale) {
    std::vector<double> s(n_params, 1.0);
    if (!auto_scale || kind == TransformKind::BSpline) return s;
    if (n_params != 6) throw Error("estimate_scales: affine expects 6 parameters");
    const double X = (fixed.width - 1) * fixed.spacing[0];
    const double Y = (fixed.height - 1) * fixed.spacing[1];
    const double cx = X / 2.0, cy = Y / 2.0;
    const double corners_x[4] = {0, X, 0, X};
    const double corners_y[4] = {0, 0, Y, Y};
    double rx = 0, ry = 0;
    for (int k = 0; k < 4; ++k) {
        rx += (corners_x[k] - cx) * (corners_x[k] - cx);
        ry += (corners_y[k] - cy) * (corners_y[k] - cy);
    }
    rx = std::sqrt(rx / 4.0);
    ry = std::sqrt(ry / 4.0);
    if (rx <= 0) rx = 1;
    if (ry <= 0) ry = 1;
    s = {rx, ry, rx, ry, 1.0, 1.0};
    return s;
}

namespace {

// -MI of fixed vs moving-resampled-through-affine, in scaled parameter space
class AffineMICost {
  public:
    AffineMICost(const GrayImage& fixed, const GrayImage& moving, int bins,
                 std::vector<double> scales, double cx, double cy)
        : fixed_(fixed), moving_(moving), acc_(bins), scales_(std::move(scales)),
          cx_(cx), cy_(cy), grid_(FixedGrid::like(fixed)),
          ramp_(index_ramp(fixed.width)), xs_(fixed.width), ys_(fixed.width),
          resampled_(fixed.size()) {
        const auto [lo, hi] = kern::minmax(fixed.data.data(), fixed.size());
        informative_ = lo != hi;
    }

    Affine2 to_affine(const std::vector<double>& x) const {
        Affine2 a;
        a.a11 = x[0] / scales_[0];
        a.a12 = x[1] / scales_[1];
        a.a21 = x[2] / scales_[2];
        a.a22 = x[3] / scales_[3];
        a.tx = x[4] / scales_[4];
        a.ty = x[5] / scales_[5];
        a.cx = cx_;
        a.cy = cy_;
        return a;
    }

    std::vector<double> to_params(const Affine2& a) const {
        return {a.a11 * scales_[0], a.a12 * scales_[1], a.a21 * scales_[2],
                a.a22 * scales_[3], a.tx * scales_[4], a.ty * scales_[5]};
    }

    double operator()(const std::vector<double>& x) {
        if (!informative_) return 0.0;
        const Affine2 a = to_affine(x);
        for (int y = 0; y < grid_.height; ++y) {
            affine_rows(a, grid_, moving_, ramp_.data(), y, xs_.data(), ys_.data());
            kern::bilinear_gather(moving_.data.data(), moving_.width, moving_.height,
                                  xs_.data(), ys_.data(),
                                  resampled_.data() + std::size_t(y) * grid_.width, grid_.width);
        }
        acc_.reset();
        acc_.accumulate(fixed_.data.data(), resampled_.data(), resampled_.size());
        acc_.finalize();
        return acc_.neg_mi();
    }

    std::vector<double> gradient(const std::vector<double>& x) {
        std::vector<double> g(x.size(), 0.0);
        if (!informative_) return g;
        const double h = 1e-3;  // central-difference step, scaled space
        std::vector<double> xp = x;
        for (std::size_t k = 0; k < x.size(); ++k) {
            xp[k] = x[k] + h;
            const double cp = (*this)(xp);
            xp[k] = x[k] - h;
            const double cm = (*this)(xp);
            xp[k] = x[k];
            g[k] = (cp - cm) / (2 * h);
        }
        return g;
    }

  private:
    const GrayImage& fixed_;
    const GrayImage& moving_;
    MIAccumulator acc_;
    std::vector<double> scales_;
    double cx_, cy_;
    FixedGrid grid_;
    std::vector<float> ramp_, xs_, ys_, resampled_;
    bool informative_ = true;
};

// -MI of fixed vs moving sampled through affine(p + D(p)); parameters are the
// B-spline coefficients. Gradients exploit the 4x4 local support: only the
// affected pixels are re-sampled and the joint histogram is updated
// incrementally.
class BsplineMICost {
  public:
    BsplineMICost(const GrayImage& fixed, const GrayImage& moving, const Affine2& affine,
                  BSplineField2 geometry, int bins)
        : fixed_(fixed), moving_(moving), affine_(affine), field_(std::move(geometry)),
          acc_(bins) {
        const auto [lo, hi] = kern::minmax(fixed.data.data(), fixed.size());
        informative_ = lo != hi;
        const int w = fixed.width, h = fixed.height;
        span_x_.resize(w);
        wx_.resize(w);
        span_y_.resize(h);
        wy_.resize(h);
        for (int x = 0; x < w; ++x) precompute_axis(x * fixed.spacing[0], 0, span_x_[x], wx_[x]);
        for (int y = 0; y < h; ++y) precompute_axis(y * fixed.spacing[1], 1, span_y_[y], wy_[y]);
        cp_x_lo_.assign(field_.cols, w);
        cp_x_hi_.assign(field_.cols, 0);
        for (int x = 0; x < w; ++x) {
            for (int m = 0; m < 4; ++m) {
                const int ci = span_x_[x] + m;
                cp_x_lo_[ci] = std::min(cp_x_lo_[ci], x);
                cp_x_hi_[ci] = std::max(cp_x_hi_[ci], x + 1);
            }
        }
        cp_y_lo_.assign(field_.rows, h);
        cp_y_hi_.assign(field_.rows, 0);
        for (int y = 0; y < h; ++y) {
            for (int m = 0; m < 4; ++m) {
                const int cj = span_y_[y] + m;
                cp_y_lo_[cj] = std::min(cp_y_lo_[cj], y);
                cp_y_hi_[cj] = std::max(cp_y_hi_[cj], y + 1);
            }
        }
        xs_.resize(fixed.size());
        ys_.resize(fixed.size());
        m_base_.resize(fixed.size());
    }

    double operator()(const std::vector<double>& coeffs) {
        ensure_base(coeffs);
        return informative_ ? base_cost_ : 0.0;
    }

    std::vector<double> gradient(const std::vector<double>& coeffs) {
        std::vector<double> g(coeffs.size(), 0.0);
        if (!informative_) return g;
        ensure_base(coeffs);
        const double h = 1e-3;  // mm; B-spline coefficient scales are 1
        const double sxm = moving_.spacing[0], sym = moving_.spacing[1];
        const double jac[2][2] = {{affine_.a11 / sxm, affine_.a21 / sym},
                                  {affine_.a12 / sxm, affine_.a22 / sym}};
        std::vector<float> rx, ry, rm;
        std::vector<std::pair<std::size_t, float>> region;  // pixel index, basis weight
        for (int cj = 0; cj < field_.rows; ++cj) {
            if (cp_y_lo_[cj] >= cp_y_hi_[cj]) continue;
            for (int ci = 0; ci < field_.cols; ++ci) {
                if (cp_x_lo_[ci] >= cp_x_hi_[ci]) continue;
                region.clear();
                for (int y = cp_y_lo_[cj]; y < cp_y_hi_[cj]; ++y) {
                    const int my = cj - span_y_[y];
                    if (my < 0 || my > 3) continue;
                    const float wy = wy_[y][my];
                    if (wy == 0.f) continue;
                    for (int x = cp_x_lo_[ci]; x < cp_x_hi_[ci]; ++x) {
                        const int mx = ci - span_x_[x];
                        if (mx < 0 || mx > 3) continue;
                        const float w = wx_[x][mx] * wy;
                        if (w != 0.f)
                            region.emplace_back(std::size_t(y) * fixed_.width + x, w);
                    }
                }
                if (region.empty()) continue;
                for (int comp = 0; comp < 2; ++comp) {
                    const std::size_t k = 2 * (std::size_t(cj) * field_.cols + ci) + comp;
                    const float fx = float(h * jac[comp][0]);
                    const float fy = float(h * jac[comp][1]);
                    rx.resize(region.size());
                    ry.resize(region.size());
                    rm.resize(region.size());
                    double c_side[2];
                    for (int side = 0; side < 2; ++side) {
                        const float sgn = side == 0 ? 1.f : -1.f;
                        for (std::size_t i = 0; i < region.size(); ++i) {
                            const auto [p, w] = region[i];
                            rx[i] = xs_[p] + sgn * w * fx;
                            ry[i] = ys_[p] + sgn * w * fy;
                        }
                        kern::bilinear_gather(moving_.data.data(), moving_.width, moving_.height,
                                              rx.data(), ry.data(), rm.data(), region.size());
                        acc_.begin_delta();
                        for (std::size_t i = 0; i < region.size(); ++i) {
                            const std::size_t p = region[i].first;
                            acc_.delta_move(fixed_.data[p], m_base_[p], rm[i]);
                        }
                        acc_.commit_deltas();
                        c_side[side] = acc_.neg_mi_current();
                        acc_.rollback();
                    }
                    g[k] = (c_side[0] - c_side[1]) / (2 * h);
                }
            }
        }
        return g;
    }

  private:
    void precompute_axis(double pos_mm, int axis, int& span, std::array<float, 4>& w) {
        const double origin = field_.origin[axis];
        const double sp = field_.spacing[axis];
        const int count = axis == 0 ? field_.cols : field_.rows;
        const double s = (pos_mm - origin) / sp;
        int i = int(std::floor(s)) - 1;
        i = std::clamp(i, 0, count - 4);
        span = i;
        double wd[4];
        bspline_weights(s - (i + 1), wd);
        for (int k = 0; k < 4; ++k) w[k] = float(wd[k]);
    }

    void ensure_base(const std::vector<double>& coeffs) {
        if (has_base_ && coeffs == base_coeffs_) return;
        base_coeffs_ = coeffs;
        field_.coeffs = coeffs;
        std::vector<float> dxf, dyf;
        field_.eval_dense(fixed_.width, fixed_.height, fixed_.spacing[0], fixed_.spacing[1],
                          dxf, dyf);
        const Affine2& A = affine_;
        const double sxm = moving_.spacing[0], sym = moving_.spacing[1];
        std::vector<float> ramp_mm(fixed_.width), px(fixed_.width), py(fixed_.width);
        for (int i = 0; i < fixed_.width; ++i) ramp_mm[i] = float(i * fixed_.spacing[0]);
        const float cst_x = float(A.cx + A.tx - A.a11 * A.cx - A.a12 * A.cy);
        const float cst_y = float(A.cy + A.ty - A.a21 * A.cx - A.a22 * A.cy);
        for (int y = 0; y < fixed_.height; ++y) {
            const std::size_t off = std::size_t(y) * fixed_.width;
            kern::affine_combine(ramp_mm.data(), dxf.data() + off, 1.f, 1.f, 0.f, px.data(),
                                 fixed_.width);
            kern::scale_offset(dyf.data() + off, 1.f, float(y * fixed_.spacing[1]), py.data(),
                               fixed_.width);
            kern::affine_combine(px.data(), py.data(), float(A.a11 / sxm), float(A.a12 / sxm),
                                 cst_x / float(sxm), xs_.data() + off, fixed_.width);
            kern::affine_combine(px.data(), py.data(), float(A.a21 / sym), float(A.a22 / sym),
                                 cst_y / float(sym), ys_.data() + off, fixed_.width);
        }
        kern::bilinear_gather(moving_.data.data(), moving_.width, moving_.height,
                              xs_.data(), ys_.data(), m_base_.data(), m_base_.size());
        acc_.reset();
        acc_.accumulate(fixed_.data.data(), m_base_.data(), m_base_.size());
        acc_.finalize();
        base_cost_ = acc_.neg_mi();
        has_base_ = true;
    }

    const GrayImage& fixed_;
    const GrayImage& moving_;
    Affine2 affine_;
    BSplineField2 field_;
    MIAccumulator acc_;
    bool informative_ = true;
    std::vector<int> span_x_, span_y_;
    std::vector<std::array<float, 4>> wx_, wy_;
    std::vector<int> cp_x_lo_, cp_x_hi_, cp_y_lo_, cp_y_hi_;
    std::vector<double> base_coeffs_;
    std::vector<float> xs_, ys_, m_base_;
    double base_cost_ = 0;
    bool has_base_ = false;
};

int effective_levels(int requested, const std::vector<GrayImage>& pf,
                     const std::vector<GrayImage>& pm) {
    return std::min({requested, int(pf.size()), int(pm.size())});
}

}  // namespace

RegisterResult register_affine(const GrayImage& fixed, const GrayImage& moving,
                               const RegistrationConfig& config) {
    config.validate();
    fixed.validate();
    moving.validate();
    const auto [flo, fhi] = kern::minmax(fixed.data.data(), fixed.size());
    if (fhi <= 0.f) throw Error("register_affine: empty fixed mask");

    const auto pf = gaussian_pyramid(fixed, config.resolutions_affine);
    const auto pm = gaussian_pyramid(moving, config.resolutions_affine);
    const int L = effective_levels(config.resolutions_affine, pf, pm);

    Affine2 A;
    A.cx = (fixed.width - 1) * fixed.spacing[0] / 2.0;
    A.cy = (fixed.height - 1) * fixed.spacing[1] / 2.0;
    // centroid initialization removes the gross offset: the map runs
    // fixed -> moving, so the translation is (moving centroid - fixed centroid)
    double cfx, cfy, cmx, cmy;
    const auto [mlo, mhi] = kern::minmax(moving.data.data(), moving.size());
    if (weighted_centroid(fixed, 0.5f * fhi, cfx, cfy) &&
        weighted_centroid(moving, 1e-6f * std::max(mhi, 1e-30f), cmx, cmy)) {
        A.tx = cmx - cfx;
        A.ty = cmy - cfy;
    }

    RegisterResult R;
    R.effective_levels = L;
    for (int l = 0; l < L; ++l) {
        const GrayImage& fl = pf[pf.size() - L + l];
        const GrayImage& ml = pm[pm.size() - L + l];
        const auto scales =
            estimate_scales(TransformKind::Affine, FixedGrid::like(fl), 6, config.auto_scale);
        AffineMICost cost(fl, ml, config.histogram_bins, scales, A.cx, A.cy);
        LbfgsOptions opts{config.lbfgs_memory, config.max_iterations_per_level,
                          config.convergence_tol, config.max_step_length};
        auto res = lbfgs_minimize([&](const std::vector<double>& x) { return cost(x); },
                                  [&](const std::vector<double>& x) { return cost.gradient(x); },
                                  cost.to_params(A), opts);
        A = cost.to_affine(res.x);
        R.pair.log.push_back({"affine", l, fl.width, fl.height, res.iterations,
                              res.initial_cost, res.cost});
        if (l == L - 1) {
            R.improved_at_finest = res.improved;
            R.pair.final_cost = res.cost;
        }
    }
    R.pair.affine = A;
    R.pair.config = config;
    return R;
}

RegisterResult register_bspline(const GrayImage& fixed, const GrayImage& moving,
                                const Affine2& affine, const RegistrationConfig& config) {
    config.validate();
    fixed.validate();
    moving.validate();
    affine.validate();
    const auto [flo, fhi] = kern::minmax(fixed.data.data(), fixed.size());
    if (fhi <= 0.f) throw Error("register_bspline: empty fixed mask");

    const auto pf = gaussian_pyramid(fixed, config.resolutions_bspline);
    const auto pm = gaussian_pyramid(moving, config.resolutions_bspline);
    const int L = effective_levels(config.resolutions_bspline, pf, pm);

    const double extent_x = (fixed.width - 1) * fixed.spacing[0];
    const double extent_y = (fixed.height - 1) * fixed.spacing[1];
    BSplineField2 field = BSplineField2::make(extent_x, extent_y, 8, 8);

    RegisterResult R;
    R.effective_levels = L;
    for (int l = 0; l < L; ++l) {
        const GrayImage& fl = pf[pf.size() - L + l];
        const GrayImage& ml = pm[pm.size() - L + l];
        BsplineMICost cost(fl, ml, affine, field, config.histogram_bins);
        LbfgsOptions opts{config.lbfgs_memory, config.max_iterations_per_level,
                          config.convergence_tol, config.max_step_length};
        auto res = lbfgs_minimize([&](const std::vector<double>& x) { return cost(x); },
                                  [&](const std::vector<double>& x) { return cost.gradient(x); },
                                  field.coeffs, opts);
        field.coeffs = std::move(res.x);
        R.pair.log.push_back({"bspline", l, fl.width, fl.height, res.iterations,
                              res.initial_cost, res.cost});
        if (l == L - 1) {
            R.improved_at_finest = res.improved;
            R.pair.final_cost = res.cost;
        }
        if (l < L - 1) field = field.refined();
    }
    R.pair.affine = affine;
    R.pair.bspline = std::move(field);
    R.pair.config = config;
    return R;
}

}  // namespace dsatlas
