#include <doctest.h>

#include <cmath>

#include "dsatlas/bspline.hpp"
#include "dsatlas/error.hpp"
#include "dsatlas/rng.hpp"

using namespace dsatlas;

TEST_CASE("basis partition of unity at 1000 random points") {
    Rng rng(71);
    for (int k = 0; k < 1000; ++k) {
        const double u = rng.uniform();
        double w[4];
        bspline_weights(u, w);
        CHECK(std::abs(w[0] + w[1] + w[2] + w[3] - 1.0) < 1e-12);
        for (int i = 0; i < 4; ++i) CHECK(w[i] >= 0.0);
    }
}

TEST_CASE("constant coefficients give an exact uniform translation") {
    BSplineField2 f = BSplineField2::make(100.0, 80.0, 8, 8);
    for (int j = 0; j < f.rows; ++j)
        for (int i = 0; i < f.cols; ++i) {
            f.dx(i, j) = 3.25;
            f.dy(i, j) = -1.5;
        }
    Rng rng(72);
    for (int k = 0; k < 1000; ++k) {
        const double x = rng.uniform(0.0, 100.0);
        const double y = rng.uniform(0.0, 80.0);
        double dx, dy;
        f.displacement_at(x, y, dx, dy);
        CHECK(std::abs(dx - 3.25) < 1e-12);
        CHECK(std::abs(dy + 1.5) < 1e-12);
    }
}

TEST_CASE("zero field is the identity; displacement bounded by max coefficient") {
    BSplineField2 f = BSplineField2::make(64.0, 64.0, 4, 4);
    double dx, dy;
    f.displacement_at(10.0, 20.0, dx, dy);
    CHECK(dx == 0.0);
    CHECK(dy == 0.0);

    Rng rng(73);
    for (auto& c : f.coeffs) c = rng.uniform(-5.0, 5.0);
    const double bound = f.max_abs_coeff();
    for (int k = 0; k < 300; ++k) {
        f.displacement_at(rng.uniform(0.0, 64.0), rng.uniform(0.0, 64.0), dx, dy);
        CHECK(std::abs(dx) <= bound + 1e-12);
        CHECK(std::abs(dy) <= bound + 1e-12);
    }
}

TEST_CASE("dense evaluation matches pointwise evaluation") {
    BSplineField2 f = BSplineField2::make(31.0, 23.0, 5, 3);
    Rng rng(74);
    for (auto& c : f.coeffs) c = rng.uniform(-2.0, 2.0);
    const int w = 32, h = 24;
    const double sx = 1.0, sy = 1.0;
    std::vector<float> dx, dy;
    f.eval_dense(w, h, sx, sy, dx, dy);
    for (int k = 0; k < 200; ++k) {
        const int x = rng.uniform_int(0, w - 1);
        const int y = rng.uniform_int(0, h - 1);
        double ex, ey;
        f.displacement_at(x * sx, y * sy, ex, ey);
        CHECK(dx[std::size_t(y) * w + x] == doctest::Approx(ex).epsilon(1e-5));
        CHECK(dy[std::size_t(y) * w + x] == doctest::Approx(ey).epsilon(1e-5));
    }
}

TEST_CASE("dyadic refinement represents the same field") {
    BSplineField2 f = BSplineField2::make(40.0, 40.0, 4, 4);
    Rng rng(75);
    for (auto& c : f.coeffs) c = rng.uniform(-3.0, 3.0);
    const BSplineField2 r = f.refined();
    CHECK(r.cols == 2 * 4 + 3);
    CHECK(r.spacing[0] == doctest::Approx(f.spacing[0] / 2));
    for (int k = 0; k < 500; ++k) {
        const double x = rng.uniform(0.0, 40.0);
        const double y = rng.uniform(0.0, 40.0);
        double ax, ay, bx, by;
        f.displacement_at(x, y, ax, ay);
        r.displacement_at(x, y, bx, by);
        CHECK(std::abs(ax - bx) < 1e-12);
        CHECK(std::abs(ay - by) < 1e-12);
    }
}

TEST_CASE("grid construction and validation") {
    CHECK_THROWS_AS(BSplineField2::make(0.0, 10.0, 4, 4), Error);
    CHECK_THROWS_AS(BSplineField2::make(10.0, 10.0, 0, 4), Error);
    BSplineField2 f = BSplineField2::make(10.0, 10.0, 1, 1);
    CHECK(f.cols == 4);  // smallest grid still has full cubic support
    f.coeffs[0] = std::nan("");
    CHECK_THROWS_AS(f.validate(), Error);
}
