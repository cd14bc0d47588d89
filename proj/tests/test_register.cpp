#include <doctest.h>

#include <cmath>

#include "dsatlas/error.hpp"
#include "dsatlas/metrics.hpp"
#include "dsatlas/registration.hpp"
#include "dsatlas/rng.hpp"

using namespace dsatlas;

namespace {

GrayImage blob_image(int w, int h, double cx, double cy, double rx, double ry) {
    GrayImage img(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double d = std::pow((x - cx) / rx, 2.0) + std::pow((y - cy) / ry, 2.0);
            if (d <= 1.0) img.at(x, y) = 1.f;
        }
    return img;
}

GrayImage two_blobs(int n) {
    GrayImage img = blob_image(n, n, n * 0.42, n * 0.46, n * 0.23, n * 0.16);
    const GrayImage b = blob_image(n, n, n * 0.63, n * 0.6, n * 0.12, n * 0.2);
    for (std::size_t i = 0; i < img.size(); ++i) img.data[i] = std::max(img.data[i], b.data[i]);
    return img;
}

RegistrationConfig quick_config() {
    RegistrationConfig c;
    c.max_iterations_per_level = 150;
    return c;
}

}  // namespace

TEST_CASE("apply_transform: identity is bit-exact on an aligned grid") {
    Rng rng(61);
    GrayImage img(33, 29);
    for (auto& v : img.data) v = float(rng.uniform());
    TransformPair identity;
    const GrayImage out = apply_transform(img, identity, FixedGrid::like(img));
    CHECK(out.data == img.data);
}

TEST_CASE("apply_transform: one-pixel translation shifts the grid exactly") {
    Rng rng(62);
    GrayImage img(24, 20);
    for (auto& v : img.data) v = float(rng.uniform());
    TransformPair pair;
    pair.affine.tx = 1.0;  // spacing 1 mm/px
    const GrayImage out = apply_transform(img, pair, FixedGrid::like(img));
    for (int y = 0; y < 20; ++y)
        for (int x = 0; x < 23; ++x) CHECK(out.at(x, y) == img.at(x + 1, y));
}

TEST_CASE("apply_transform: random affine matches a per-pixel oracle") {
    Rng rng(63);
    GrayImage img(40, 36, {0.7, 1.3});
    for (auto& v : img.data) v = float(rng.uniform());
    for (int trial = 0; trial < 5; ++trial) {
        TransformPair pair;
        pair.affine.a11 = rng.uniform(0.8, 1.2);
        pair.affine.a12 = rng.uniform(-0.2, 0.2);
        pair.affine.a21 = rng.uniform(-0.2, 0.2);
        pair.affine.a22 = rng.uniform(0.8, 1.2);
        pair.affine.tx = rng.uniform(-4, 4);
        pair.affine.ty = rng.uniform(-4, 4);
        pair.affine.cx = 14.0;
        pair.affine.cy = 18.0;
        const FixedGrid grid{32, 30, {1.1, 0.9}};
        const GrayImage out = apply_transform(img, pair, grid);
        for (int k = 0; k < 100; ++k) {
            const int x = rng.uniform_int(0, grid.width - 1);
            const int y = rng.uniform_int(0, grid.height - 1);
            double qx, qy;
            pair.affine.apply(x * grid.spacing[0], y * grid.spacing[1], qx, qy);
            const double px = qx / img.spacing[0], py = qy / img.spacing[1];
            float expect = 0.f;
            if (px >= 0 && px <= img.width - 1 && py >= 0 && py <= img.height - 1) {
                const int x0 = std::min(int(px), img.width - 2);
                const int y0 = std::min(int(py), img.height - 2);
                const double fx = px - x0, fy = py - y0;
                expect = float((img.at(x0, y0) * (1 - fx) + img.at(x0 + 1, y0) * fx) * (1 - fy) +
                               (img.at(x0, y0 + 1) * (1 - fx) + img.at(x0 + 1, y0 + 1) * fx) * fy);
            }
            CHECK(out.at(x, y) == doctest::Approx(expect).epsilon(1e-5));
        }
    }
}

TEST_CASE("apply_transform: zero-coefficient B-spline is the identity") {
    Rng rng(64);
    GrayImage img(26, 22);
    for (auto& v : img.data) v = float(rng.uniform());
    TransformPair pair;
    pair.bspline = BSplineField2::make(25.0, 21.0, 4, 4);
    const GrayImage out = apply_transform(img, pair, FixedGrid::like(img));
    for (std::size_t i = 0; i < img.size(); ++i)
        CHECK(out.data[i] == doctest::Approx(img.data[i]).epsilon(1e-6));
}

TEST_CASE("singular affine is rejected") {
    TransformPair pair;
    pair.affine.a11 = 0;
    pair.affine.a22 = 0;
    GrayImage img(8, 8);
    CHECK_THROWS_AS(apply_transform(img, pair, FixedGrid::like(img)), Error);
}

TEST_CASE("estimate_scales: affine corner RMS and translation units") {
    // 100 mm wide, 60 mm tall, centered
    const FixedGrid grid{101, 61, {1.0, 1.0}};
    const auto s = estimate_scales(TransformKind::Affine, grid, 6, true);
    CHECK(s[0] == doctest::Approx(50.0));  // a11: RMS |x - cx| over corners
    CHECK(s[1] == doctest::Approx(30.0));  // a12: RMS |y - cy|
    CHECK(s[2] == doctest::Approx(50.0));
    CHECK(s[3] == doctest::Approx(30.0));
    CHECK(s[4] == 1.0);
    CHECK(s[5] == 1.0);

    // doubling the extent doubles the matrix-entry scales
    const FixedGrid big{201, 121, {1.0, 1.0}};
    const auto sb = estimate_scales(TransformKind::Affine, big, 6, true);
    CHECK(sb[0] == doctest::Approx(100.0));
    CHECK(sb[1] == doctest::Approx(60.0));

    // auto_scale off and B-spline coefficients: all ones
    for (double v : estimate_scales(TransformKind::Affine, grid, 6, false)) CHECK(v == 1.0);
    for (double v : estimate_scales(TransformKind::BSpline, grid, 10, true)) CHECK(v == 1.0);
}

TEST_CASE("register_affine: recovers a known translation within 0.5 px") {
    const GrayImage moving = two_blobs(96);
    TransformPair shift;
    shift.affine.tx = 10.0;
    shift.affine.ty = -5.0;
    const GrayImage fixed = apply_transform(moving, shift, FixedGrid::like(moving));
    const auto res = register_affine(fixed, moving, quick_config());
    CHECK(std::abs(res.pair.affine.tx - 10.0) < 0.5);
    CHECK(std::abs(res.pair.affine.ty + 5.0) < 0.5);
    CHECK(std::abs(res.pair.affine.a11 - 1.0) < 0.05);
}

TEST_CASE("register_affine: self-registration stays at the identity") {
    const GrayImage img = two_blobs(64);
    const auto res = register_affine(img, img, quick_config());
    CHECK(std::abs(res.pair.affine.tx) < 0.1);
    CHECK(std::abs(res.pair.affine.ty) < 0.1);
    CHECK(std::abs(res.pair.affine.rotation_deg()) < 0.2);
}

TEST_CASE("register_affine: recovers an 8-degree rotation within 0.5 degrees") {
    const GrayImage moving = two_blobs(96);
    TransformPair rot;
    const double th = 8.0 * 3.14159265358979323846 / 180.0;
    rot.affine.a11 = std::cos(th);
    rot.affine.a12 = -std::sin(th);
    rot.affine.a21 = std::sin(th);
    rot.affine.a22 = std::cos(th);
    rot.affine.cx = 47.5;
    rot.affine.cy = 47.5;
    const GrayImage fixed = apply_transform(moving, rot, FixedGrid::like(moving));
    const auto res = register_affine(fixed, moving, quick_config());
    CHECK(std::abs(res.pair.affine.rotation_deg() - 8.0) < 0.5);
}

TEST_CASE("register_affine: empty fixed mask is an error") {
    GrayImage fixed(32, 32);  // all zero
    const GrayImage moving = two_blobs(32);
    CHECK_THROWS_WITH_AS(register_affine(fixed, moving, quick_config()),
                         doctest::Contains("empty fixed mask"), Error);
}

TEST_CASE("register_affine: level costs never increase within a level") {
    const GrayImage moving = two_blobs(64);
    TransformPair shift;
    shift.affine.tx = 4.0;
    const GrayImage fixed = apply_transform(moving, shift, FixedGrid::like(moving));
    const auto res = register_affine(fixed, moving, quick_config());
    for (const auto& log : res.pair.log) CHECK(log.final_cost <= log.initial_cost + 1e-12);
}

TEST_CASE("self-registration never worsens SSIM relative to identity") {
    const GrayImage img = two_blobs(64);
    const GrayImage binarized = [&] {
        GrayImage b = img;
        for (auto& v : b.data) v = v > 0.5f ? 1.f : 0.f;
        return b;
    }();
    const double identity_ssim = ssim(binarized, binarized).mean_ssim;
    const auto res = register_affine(img, img, quick_config());
    GrayImage warped = apply_transform(img, res.pair, FixedGrid::like(img));
    for (auto& v : warped.data) v = v > 0.5f ? 1.f : 0.f;
    const double reg_ssim = ssim(binarized, warped).mean_ssim;
    CHECK(reg_ssim >= identity_ssim - 1e-9);
}

TEST_CASE("register_bspline: self-registration keeps displacements tiny") {
    const GrayImage img = two_blobs(64);
    RegistrationConfig cfg = quick_config();
    const auto affine_res = register_affine(img, img, cfg);
    const auto res = register_bspline(img, img, affine_res.pair.affine, cfg);
    REQUIRE(res.pair.bspline.has_value());
    CHECK(res.pair.bspline->max_abs_coeff() < 0.25);  // px = mm here
}

TEST_CASE("register_bspline: recovers a smooth sinusoidal warp") {
    const int n = 96;
    const GrayImage moving = two_blobs(n);
    // smooth warp, max 4 px, built from a coarse field
    TransformPair warp;
    BSplineField2 truth = BSplineField2::make(n - 1.0, n - 1.0, 3, 3);
    Rng rng(66);
    for (auto& c : truth.coeffs) c = rng.uniform(-4.0, 4.0);
    warp.bspline = truth;
    const GrayImage fixed = apply_transform(moving, warp, FixedGrid::like(moving));

    RegistrationConfig cfg = quick_config();
    Affine2 identity;
    identity.cx = (n - 1) / 2.0;
    identity.cy = (n - 1) / 2.0;
    const auto res = register_bspline(fixed, moving, identity, cfg);
    REQUIRE(res.pair.bspline.has_value());

    // compare recovered vs true displacement inside the blob support
    std::vector<float> tdx, tdy, rdx, rdy;
    truth.eval_dense(n, n, 1.0, 1.0, tdx, tdy);
    res.pair.bspline->eval_dense(n, n, 1.0, 1.0, rdx, rdy);
    double err_sum = 0;
    int count = 0;
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            const std::size_t i = std::size_t(y) * n + x;
            if (fixed.data[i] <= 0.5f) continue;
            err_sum += std::hypot(double(rdx[i]) - tdx[i], double(rdy[i]) - tdy[i]);
            ++count;
        }
    REQUIRE(count > 0);
    CHECK(err_sum / count <= 2.0);
}

TEST_CASE("gaussian pyramid: level count clamps at 32 px") {
    GrayImage img(256, 192);
    const auto pyr = gaussian_pyramid(img, 20);
    // 192 -> 96 -> 48 stops before 24
    CHECK(pyr.size() == 3);
    CHECK(pyr.front().width == 64);   // coarsest
    CHECK(pyr.front().height == 48);
    CHECK(pyr.back().width == 256);   // finest is the input
    CHECK(pyr.front().spacing[0] == doctest::Approx(4.0));

    const auto one = gaussian_pyramid(img, 1);
    CHECK(one.size() == 1);

    GrayImage tiny(16, 16);
    CHECK(gaussian_pyramid(tiny, 20).size() == 1);
}

TEST_CASE("transform JSON round-trip is exact") {
    TransformPair pair;
    pair.affine.a11 = 1.0123456789012345;
    pair.affine.a12 = -0.034567890123456789;
    pair.affine.tx = 12.345678901234567;
    pair.affine.cx = 50.0;
    pair.bspline = BSplineField2::make(99.0, 99.0, 4, 4);
    Rng rng(67);
    for (auto& c : pair.bspline->coeffs) c = rng.uniform(-3, 3);
    pair.final_cost = -0.87654321098765432;
    pair.config.histogram_bins = 48;

    const std::string text = transform_pair_to_json(pair);
    const TransformPair back = transform_pair_from_json(text);
    CHECK(back.affine.a11 == pair.affine.a11);
    CHECK(back.affine.a12 == pair.affine.a12);
    CHECK(back.affine.tx == pair.affine.tx);
    CHECK(back.final_cost == pair.final_cost);
    CHECK(back.config.histogram_bins == 48);
    REQUIRE(back.bspline.has_value());
    CHECK(back.bspline->coeffs == pair.bspline->coeffs);

    // serialization is deterministic
    CHECK(transform_pair_to_json(back) == text);

    // no bspline block once the stage is skipped
    TransformPair affine_only;
    affine_only.affine.cx = 1;
    const std::string aj = transform_pair_to_json(affine_only);
    CHECK(aj.find("\"bspline\"") == std::string::npos);
    CHECK_FALSE(transform_pair_from_json(aj).bspline.has_value());
}
