#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "dsatlas/kernels.hpp"
#include "dsatlas/rng.hpp"

using namespace dsatlas;

namespace {

std::vector<float> random_vec(std::size_t n, Rng& rng, float lo = -2.f, float hi = 2.f) {
    std::vector<float> v(n);
    for (auto& x : v) x = float(rng.uniform(lo, hi));
    return v;
}

bool bit_equal(const std::vector<float>& a, const std::vector<float>& b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

}  // namespace

#if defined(DSATLAS_HAVE_AVX2)

TEST_CASE("scalar and AVX2 elementwise kernels are bit-identical") {
    if (!kern::avx2_active()) return;  // no AVX2 at runtime, nothing to compare
    Rng rng(42);
    for (std::size_t n : {std::size_t(1), std::size_t(7), std::size_t(8), std::size_t(9),
                          std::size_t(64), std::size_t(1000), std::size_t(4097)}) {
        const auto x = random_vec(n, rng);
        const auto y = random_vec(n, rng);
        std::vector<float> a(n), b(n);

        kern::scalar::scale_offset(x.data(), 1.7f, -0.3f, a.data(), n);
        kern::avx2::scale_offset(x.data(), 1.7f, -0.3f, b.data(), n);
        CHECK(bit_equal(a, b));

        kern::scalar::multiply(x.data(), y.data(), a.data(), n);
        kern::avx2::multiply(x.data(), y.data(), b.data(), n);
        CHECK(bit_equal(a, b));

        kern::scalar::affine_combine(x.data(), y.data(), 0.31f, -1.2f, 0.05f, a.data(), n);
        kern::avx2::affine_combine(x.data(), y.data(), 0.31f, -1.2f, 0.05f, b.data(), n);
        CHECK(bit_equal(a, b));

        const auto w0 = random_vec(n, rng), w1 = random_vec(n, rng);
        const auto w2 = random_vec(n, rng), w3 = random_vec(n, rng);
        kern::scalar::weighted4(w0.data(), w1.data(), w2.data(), w3.data(), 0.2f, -0.4f, 1.1f,
                                0.9f, a.data(), n);
        kern::avx2::weighted4(w0.data(), w1.data(), w2.data(), w3.data(), 0.2f, -0.4f, 1.1f,
                              0.9f, b.data(), n);
        CHECK(bit_equal(a, b));

        std::vector<double> acc_a(n, 0.25), acc_b(n, 0.25);
        kern::scalar::accumulate(acc_a.data(), x.data(), n);
        kern::avx2::accumulate(acc_b.data(), x.data(), n);
        CHECK(std::memcmp(acc_a.data(), acc_b.data(), n * sizeof(double)) == 0);

        const auto mm_a = kern::scalar::minmax(x.data(), n);
        const auto mm_b = kern::avx2::minmax(x.data(), n);
        CHECK(mm_a == mm_b);
    }
}

TEST_CASE("bilinear gather variants are bit-identical, including borders") {
    if (!kern::avx2_active()) return;
    Rng rng(7);
    const int w = 37, h = 23;
    const auto img = random_vec(std::size_t(w) * h, rng, 0.f, 1.f);
    const std::size_t n = 513;
    std::vector<float> xs(n), ys(n);
    for (std::size_t i = 0; i < n; ++i) {
        // samples inside, on edges, and outside
        xs[i] = float(rng.uniform(-3.0, w + 2.0));
        ys[i] = float(rng.uniform(-3.0, h + 2.0));
    }
    xs[0] = 0;
    ys[0] = 0;
    xs[1] = float(w - 1);
    ys[1] = float(h - 1);
    xs[2] = float(w - 1);
    ys[2] = 0;
    std::vector<float> a(n), b(n);
    kern::scalar::bilinear_gather(img.data(), w, h, xs.data(), ys.data(), a.data(), n);
    kern::avx2::bilinear_gather(img.data(), w, h, xs.data(), ys.data(), b.data(), n);
    CHECK(bit_equal(a, b));
}

TEST_CASE("convolution variants are bit-identical") {
    if (!kern::avx2_active()) return;
    Rng rng(11);
    for (auto [w, h] : {std::pair{64, 48}, std::pair{11, 11}, std::pair{5, 9}, std::pair{33, 1}}) {
        const auto img = random_vec(std::size_t(w) * h, rng);
        for (int radius : {1, 2, 5}) {
            std::vector<float> taps(radius + 1);
            for (int k = 0; k <= radius; ++k) taps[k] = float(std::exp(-0.3 * k));
            std::vector<float> a(img.size()), b(img.size());
            kern::scalar::conv_sym_h(img.data(), a.data(), w, h, taps.data(), radius);
            kern::avx2::conv_sym_h(img.data(), b.data(), w, h, taps.data(), radius);
            CHECK(bit_equal(a, b));
            kern::scalar::conv_sym_v(img.data(), a.data(), w, h, taps.data(), radius);
            kern::avx2::conv_sym_v(img.data(), b.data(), w, h, taps.data(), radius);
            CHECK(bit_equal(a, b));
        }
    }
}

TEST_CASE("sum reduction agrees within accumulation-order tolerance") {
    if (!kern::avx2_active()) return;
    Rng rng(13);
    const auto x = random_vec(100000, rng);
    const double a = kern::scalar::sum(x.data(), x.size());
    const double b = kern::avx2::sum(x.data(), x.size());
    CHECK(a == doctest::Approx(b).epsilon(1e-9));
}

#endif  // DSATLAS_HAVE_AVX2

TEST_CASE("bilinear gather semantics") {
    // 2x2 image; integer coordinates are exact, the center interpolates
    const float img[4] = {0.f, 1.f, 2.f, 3.f};
    float out[5];
    const float xs[5] = {0.f, 1.f, 0.5f, -0.1f, 1.1f};
    const float ys[5] = {0.f, 1.f, 0.5f, 0.f, 0.f};
    kern::bilinear_gather(img, 2, 2, xs, ys, out, 5);
    CHECK(out[0] == 0.f);
    CHECK(out[1] == 3.f);
    CHECK(out[2] == doctest::Approx(1.5));
    CHECK(out[3] == 0.f);  // outside
    CHECK(out[4] == 0.f);  // outside
}

TEST_CASE("force-scalar hook flips the dispatch") {
    const bool was = kern::avx2_active();
    kern::set_force_scalar(true);
    CHECK_FALSE(kern::avx2_active());
    kern::set_force_scalar(false);
    CHECK(kern::avx2_active() == was);
}

TEST_CASE("sum matches a plain double loop") {
    Rng rng(3);
    const auto x = random_vec(999, rng);
    double ref = 0;
    for (float v : x) ref += v;
    CHECK(kern::sum(x.data(), x.size()) == doctest::Approx(ref).epsilon(1e-12));
}
