#include <doctest.h>

#include <map>

#include <cmath>

#include "dsatlas/error.hpp"
#include "dsatlas/mi_accumulator.hpp"
#include "dsatlas/registration.hpp"
#include "dsatlas/rng.hpp"

using namespace dsatlas;

namespace {

// k equiprobable values on exact bin centers: with bins-1 = 32 the values
// i*(32/k)/32 are exact in float, so no partial-volume spill
GrayImage quantized_levels(int w, int h, int k, int bins, Rng& rng) {
    GrayImage img(w, h);
    std::vector<int> levels(img.size());
    for (std::size_t i = 0; i < levels.size(); ++i) levels[i] = int(i % k);
    for (std::size_t i = levels.size(); i > 1; --i)
        std::swap(levels[i - 1], levels[rng.uniform_int(0, int(i) - 1)]);
    const int stride = (bins - 1) / k;
    for (std::size_t i = 0; i < img.size(); ++i)
        img.data[i] = float(levels[i] * stride) / float(bins - 1);
    return img;
}

}  // namespace

TEST_CASE("MI(x,x) equals log k on k-level equiprobable images") {
    Rng rng(41);
    const int bins = 33;  // bins-1 = 32 keeps the level values exact in float
    for (int k : {2, 4, 8}) {
        const GrayImage x = quantized_levels(64, 64, k, bins, rng);
        const MIResult r = mutual_information(x, x, bins);
        CHECK(-r.cost == doctest::Approx(std::log(double(k))).epsilon(1e-9));
    }
}

TEST_CASE("MI(x, constant) is zero") {
    Rng rng(42);
    const GrayImage x = quantized_levels(32, 32, 5, 32, rng);
    GrayImage c(32, 32);
    c.data.assign(c.size(), 0.437f);  // spreads over two bins, still uninformative
    const MIResult r = mutual_information(x, c, 32);
    CHECK(std::abs(r.cost) < 1e-12);
}

TEST_CASE("MI symmetry within 1e-12") {
    Rng rng(43);
    for (int trial = 0; trial < 5; ++trial) {
        GrayImage x(48, 40), y(48, 40);
        for (auto& v : x.data) v = float(rng.uniform());
        for (auto& v : y.data) v = float(rng.uniform());
        const double a = mutual_information(x, y, 32).cost;
        const double b = mutual_information(y, x, 32).cost;
        CHECK(std::abs(a - b) < 1e-12);
    }
}

TEST_CASE("constant fixed image is flagged non-informative") {
    GrayImage c(16, 16);
    c.data.assign(c.size(), 0.5f);
    GrayImage x(16, 16);
    Rng rng(44);
    for (auto& v : x.data) v = float(rng.uniform());
    const MIResult r = mutual_information(c, x, 32);
    CHECK_FALSE(r.informative);
    CHECK(r.cost == 0.0);
}

TEST_CASE("dimension mismatch is an error") {
    GrayImage a(4, 4), b(5, 4);
    CHECK_THROWS_AS(mutual_information(a, b, 32), Error);
}

TEST_CASE("incremental delta + rollback reproduces bulk recomputation") {
    Rng rng(45);
    const int n = 400;
    std::vector<float> fixed(n), moving(n);
    for (auto& v : fixed) v = float(rng.uniform());
    for (auto& v : moving) v = float(rng.uniform());

    MIAccumulator acc(32);
    acc.accumulate(fixed.data(), moving.data(), n);
    acc.finalize();
    const double base = acc.neg_mi();

    // move 25 samples to new values; compare against a fresh accumulator
    std::vector<float> moved = moving;
    acc.begin_delta();
    for (int k = 0; k < 25; ++k) {
        const int i = rng.uniform_int(0, n - 1);
        const float nv = float(rng.uniform());
        acc.delta_move(fixed[i], moved[i], nv);
        moved[i] = nv;
    }
    acc.commit_deltas();
    const double with_delta = acc.neg_mi_current();

    MIAccumulator fresh(32);
    fresh.accumulate(fixed.data(), moved.data(), n);
    fresh.finalize();
    CHECK(with_delta == doctest::Approx(fresh.neg_mi()).epsilon(1e-10));

    // rollback restores the exact base state
    acc.rollback();
    CHECK(acc.neg_mi() == base);
}

TEST_CASE("repeated delta/rollback cycles do not drift") {
    Rng rng(46);
    const int n = 256;
    std::vector<float> fixed(n), moving(n);
    for (auto& v : fixed) v = float(rng.uniform());
    for (auto& v : moving) v = float(rng.uniform());
    MIAccumulator acc(16);
    acc.accumulate(fixed.data(), moving.data(), n);
    acc.finalize();
    const double base = acc.neg_mi();
    for (int cycle = 0; cycle < 200; ++cycle) {
        acc.begin_delta();
        for (int k = 0; k < 10; ++k) {
            const int i = rng.uniform_int(0, n - 1);
            acc.delta_move(fixed[i], moving[i], float(rng.uniform()));
        }
        acc.commit_deltas();
        acc.rollback();
        CHECK(acc.neg_mi() == base);  // bitwise equal by construction
    }
}
