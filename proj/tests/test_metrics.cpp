#include <doctest.h>

#include <cmath>
#include <random>

#include "dift/metrics.hpp"
#include "oracles.hpp"

using namespace dift;

namespace {

FlowField offset(const FlowField& f, float du, float dv) {
    FlowField out = f;
    for (int y = 0; y < f.height(); ++y)
        for (int x = 0; x < f.width(); ++x) {
            out.u(y, x) += du;
            out.v(y, x) += dv;
        }
    return out;
}

}  // namespace

TEST_CASE("epe identities") {
    std::mt19937 rng(1);
    const FlowField gt = oracle::random_flow(6, 9, -30.0f, 30.0f, rng);
    CHECK(epe(gt, gt) == 0.0);
    CHECK(epe(offset(FlowField(6, 9), 3.0f, 4.0f), FlowField(6, 9)) == 5.0);
    CHECK(epe(offset(gt, 3.0f, 4.0f), gt) == doctest::Approx(5.0).epsilon(1e-6));

    const FlowField pred = oracle::random_flow(6, 9, -30.0f, 30.0f, rng);
    const FlowField c1 = offset(pred, 2.0f, -1.0f), c2 = offset(gt, 2.0f, -1.0f);
    CHECK(std::abs(epe(c1, c2) - epe(pred, gt)) < 1e-4);
}

TEST_CASE("epe and f1 agree with a two-loop oracle") {
    std::mt19937 rng(2);
    std::uniform_int_distribution<int> keep(0, 3);
    for (int trial = 0; trial < 100; ++trial) {
        const FlowField pred = oracle::random_flow(5, 7, -10.0f, 10.0f, rng);
        const FlowField gt = oracle::random_flow(5, 7, -10.0f, 10.0f, rng);
        std::vector<std::uint8_t> mask(35);
        for (auto& m : mask) m = keep(rng) != 0;
        mask[0] = 1;
        double sum = 0.0, msum = 0.0;
        int out = 0, mout = 0, mn = 0;
        for (int y = 0; y < 5; ++y)
            for (int x = 0; x < 7; ++x) {
                const double du = double{pred.u(y, x)} - gt.u(y, x), dv = double{pred.v(y, x)} - gt.v(y, x);
                const double e = std::sqrt(du * du + dv * dv);
                const double g = std::sqrt(double{gt.u(y, x)} * gt.u(y, x) + double{gt.v(y, x)} * gt.v(y, x));
                const bool bad = e > 3.0 && e > 0.05 * g;
                sum += e;
                out += bad;
                if (mask[y * 7 + x]) {
                    msum += e;
                    mout += bad;
                    ++mn;
                }
            }
        CHECK(std::abs(epe(pred, gt) - sum / 35.0) <= 1e-6);
        CHECK(std::abs(f1_all(pred, gt) - 100.0 * out / 35.0) <= 1e-9);
        CHECK(std::abs(epe(pred, gt, ValidMask(mask)) - msum / mn) <= 1e-6);
        CHECK(std::abs(f1_all(pred, gt, ValidMask(mask)) - 100.0 * mout / mn) <= 1e-9);
    }
}

TEST_CASE("f1-all outlier rule") {
    CHECK(f1_all(FlowField(3, 3, 1.0f, 0.0f), FlowField(3, 3, 1.0f, 0.0f)) == 0.0);
    CHECK(f1_all(FlowField(3, 3, 11.0f, 0.0f), FlowField(3, 3, 1.0f, 0.0f)) == 100.0);
    // Error exactly 3 px with |gt| = 10 is an inlier (strict).
    CHECK(f1_all(FlowField(2, 2, 13.0f, 0.0f), FlowField(2, 2, 10.0f, 0.0f)) == 0.0);
    // Above 3 px but within 5% of a large flow is also an inlier.
    CHECK(f1_all(FlowField(2, 2, 104.0f, 0.0f), FlowField(2, 2, 100.0f, 0.0f)) == 0.0);
    CHECK(f1_all(FlowField(2, 2, 106.0f, 0.0f), FlowField(2, 2, 100.0f, 0.0f)) == 100.0);
}

TEST_CASE("metric errors") {
    CHECK_THROWS_AS(epe(FlowField(2, 3), FlowField(3, 2)), Error);
    const std::vector<std::uint8_t> none(4, 0);
    CHECK_THROWS_AS(epe(FlowField(2, 2), FlowField(2, 2), ValidMask(none)), Error);
    CHECK_THROWS_AS(f1_all(FlowField(2, 2), FlowField(2, 2), ValidMask(none)), Error);
    const std::vector<std::uint8_t> wrong(3, 1);
    CHECK_THROWS_AS(epe(FlowField(2, 2), FlowField(2, 2), ValidMask(wrong)), Error);
}

TEST_CASE("flow colorization") {
    const Tensor white = colorize_flow(FlowField(4, 4));
    for (float v : white.data()) CHECK(v == 1.0f);

    const Tensor px = colorize_flow(FlowField(1, 1, 5.0f, 0.0f));
    CHECK(px.at(0, 0, 0) == 1.0f);
    CHECK(px.at(1, 0, 0) == 0.0f);
    CHECK(px.at(2, 0, 0) == 0.0f);

    std::mt19937 rng(3);
    const FlowField f = oracle::random_flow(6, 8, -4.0f, 4.0f, rng);
    FlowField twice = f;
    for (auto& v : twice.data()) v *= 2.0f;
    CHECK(colorize_flow(f) == colorize_flow(twice));
    CHECK(colorize_flow(f, 2.0) != colorize_flow(twice, 2.0));
    const Tensor clipped = colorize_flow(twice, 1.0);
    for (float v : clipped.data()) CHECK((v >= 0.0f && v <= 1.0f));
}

TEST_CASE("synthetic translation") {
    std::mt19937 rng(4);
    const Tensor img = oracle::random_tensor(Shape{1, 6, 10}, rng, 0.0f, 1.0f);
    CHECK(warp_translate(img, 0.0, 0.0) == img);
    const Tensor moved = warp_translate(img, 5.0, 0.0);
    for (int y = 0; y < 6; ++y) {
        for (int x = 0; x < 5; ++x) CHECK(moved.at(0, y, x) == 0.0f);
        for (int x = 5; x < 10; ++x) CHECK(moved.at(0, y, x) == img.at(0, y, x - 5));
    }
    const Tensor half = warp_translate(img, 0.5, -1.0);
    CHECK(half.at(0, 2, 3) == doctest::Approx(0.5 * (img.at(0, 3, 2) + img.at(0, 3, 3))).epsilon(1e-6));
}
