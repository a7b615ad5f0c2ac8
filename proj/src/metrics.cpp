#include "dift/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "dift/sampling.hpp"

namespace dift {

namespace {

void check_pair(const FlowField& pred, const FlowField& gt, const std::optional<ValidMask>& valid) {
    if (pred.height() != gt.height() || pred.width() != gt.width()) {
        fail("metrics: prediction " + std::to_string(pred.height()) + "x" + std::to_string(pred.width()) +
             " does not match ground truth " + std::to_string(gt.height()) + "x" + std::to_string(gt.width()));
    }
    if (valid && valid->size() != gt.pixels()) fail("metrics: mask size does not match flow dims");
}

template <typename Fn>
std::size_t for_valid(const FlowField& gt, const std::optional<ValidMask>& valid, Fn&& fn) {
    std::size_t n = 0;
    for (int y = 0; y < gt.height(); ++y) {
        for (int x = 0; x < gt.width(); ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * gt.width() + x;
            if (valid && (*valid)[i] == 0) continue;
            fn(y, x);
            ++n;
        }
    }
    if (n == 0) fail("metrics: empty valid mask");
    return n;
}

double endpoint(const FlowField& a, const FlowField& b, int y, int x) {
    const double du = static_cast<double>(a.u(y, x)) - b.u(y, x);
    const double dv = static_cast<double>(a.v(y, x)) - b.v(y, x);
    return std::sqrt(du * du + dv * dv);
}

}  // namespace

double epe(const FlowField& pred, const FlowField& gt, std::optional<ValidMask> valid) {
    check_pair(pred, gt, valid);
    double sum = 0.0;
    const std::size_t n = for_valid(gt, valid, [&](int y, int x) { sum += endpoint(pred, gt, y, x); });
    return sum / static_cast<double>(n);
}

double f1_all(const FlowField& pred, const FlowField& gt, std::optional<ValidMask> valid) {
    check_pair(pred, gt, valid);
    std::size_t outliers = 0;
    const std::size_t n = for_valid(gt, valid, [&](int y, int x) {
        const double err = endpoint(pred, gt, y, x);
        const double mag = std::hypot(static_cast<double>(gt.u(y, x)), static_cast<double>(gt.v(y, x)));
        if (err > 3.0 && err > 0.05 * mag) ++outliers;
    });
    return 100.0 * static_cast<double>(outliers) / static_cast<double>(n);
}

namespace {

// RY, YG, GC, CB, BM, MR segment lengths of the Middlebury wheel.
std::vector<std::array<double, 3>> make_color_wheel() {
    constexpr int RY = 15, YG = 6, GC = 4, CB = 11, BM = 13, MR = 6;
    std::vector<std::array<double, 3>> wheel;
    for (int i = 0; i < RY; ++i) wheel.push_back({255.0, std::floor(255.0 * i / RY), 0.0});
    for (int i = 0; i < YG; ++i) wheel.push_back({255.0 - std::floor(255.0 * i / YG), 255.0, 0.0});
    for (int i = 0; i < GC; ++i) wheel.push_back({0.0, 255.0, std::floor(255.0 * i / GC)});
    for (int i = 0; i < CB; ++i) wheel.push_back({0.0, 255.0 - std::floor(255.0 * i / CB), 255.0});
    for (int i = 0; i < BM; ++i) wheel.push_back({std::floor(255.0 * i / BM), 0.0, 255.0});
    for (int i = 0; i < MR; ++i) wheel.push_back({255.0, 0.0, 255.0 - std::floor(255.0 * i / MR)});
    return wheel;
}

}  // namespace

Tensor colorize_flow(const FlowField& flow, std::optional<double> max_magnitude) {
    static const auto wheel = make_color_wheel();
    const int ncols = static_cast<int>(wheel.size());
    double maxrad = 0.0;
    if (max_magnitude) {
        maxrad = *max_magnitude;
    } else {
        for (int y = 0; y < flow.height(); ++y) {
            for (int x = 0; x < flow.width(); ++x) {
                const double u = flow.u(y, x);
                const double v = flow.v(y, x);
                maxrad = std::max(maxrad, std::sqrt(u * u + v * v));
            }
        }
    }
    if (!(maxrad > 0.0)) maxrad = 1.0;

    Tensor img(Shape{3, flow.height(), flow.width()});
    for (int y = 0; y < flow.height(); ++y) {
        for (int x = 0; x < flow.width(); ++x) {
            const double u = flow.u(y, x);
            const double v = flow.v(y, x);
            const double rad = std::sqrt(u * u + v * v) / maxrad;
            double a = std::atan2(-v, -u) / std::numbers::pi;
            if (a >= 1.0) a = -1.0;  // same direction; keeps +x on wheel index 0
            const double fk = (a + 1.0) / 2.0 * (ncols - 1);
            const int k0 = static_cast<int>(std::floor(fk));
            const int k1 = (k0 + 1) % ncols;
            const double f = fk - k0;
            for (int c = 0; c < 3; ++c) {
                const double col0 = wheel[static_cast<std::size_t>(k0)][static_cast<std::size_t>(c)] / 255.0;
                const double col1 = wheel[static_cast<std::size_t>(k1)][static_cast<std::size_t>(c)] / 255.0;
                double col = (1.0 - f) * col0 + f * col1;
                col = rad <= 1.0 ? 1.0 - rad * (1.0 - col) : col * 0.75;
                img.at(c, y, x) = static_cast<float>(col);
            }
        }
    }
    return img;
}

Tensor warp_translate(const Tensor& image1, double u, double v) {
    const int h = image1.height();
    const int w = image1.width();
    std::vector<Coord> coords;
    coords.reserve(static_cast<std::size_t>(h) * w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) coords.push_back({x - u, y - v});
    }
    return grid_sample_bilinear(image1, coords, h, w);
}

}  // namespace dift
