#include "dift/selftest.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <ostream>
#include <random>
#include <sstream>

#include "dift/budget.hpp"
#include "dift/corrvol.hpp"
#include "dift/metrics.hpp"
#include "dift/refine.hpp"
#include "dift/sampling.hpp"
#include "dift/serial.hpp"

namespace dift {

namespace {

Tensor random_tensor(Shape s, std::mt19937& rng, float lo = -1.0f, float hi = 1.0f) {
    std::uniform_real_distribution<float> d(lo, hi);
    Tensor t(s);
    for (auto& v : t.data()) v = d(rng);
    return t;
}

double max_abs_diff(std::span<const float> a, std::span<const float> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(double{a[i]} - double{b[i]}));
    return m;
}

// Direct evaluation, independent of the kernels under test.
double naive_conv_at(const Tensor& in, const ConvParams& p, int oc, int oy, int ox) {
    double acc = p.bias[static_cast<std::size_t>(oc)];
    for (int ic = 0; ic < p.in_channels; ++ic) {
        for (int ky = 0; ky < p.kernel_h; ++ky) {
            for (int kx = 0; kx < p.kernel_w; ++kx) {
                const int iy = oy * p.stride - p.padding + ky;
                const int ix = ox * p.stride - p.padding + kx;
                if (iy >= 0 && iy < in.height() && ix >= 0 && ix < in.width()) {
                    acc += double{p.weight(oc, ic, ky, kx)} * in.at(ic, iy, ix);
                }
            }
        }
    }
    return acc;
}

SuiteResult suite_conv(std::mt19937& rng) {
    double worst = 0.0;
    bool bit_exact = true;
    for (int trial = 0; trial < 20; ++trial) {
        std::uniform_int_distribution<int> dim(3, 10), ch(1, 6), k(1, 3), s(1, 2);
        const Tensor in = random_tensor(Shape{ch(rng), dim(rng), dim(rng)}, rng);
        ConvParams p = ConvParams::zeros(ch(rng), in.channels(), k(rng), s(rng), trial % 2);
        for (auto& w : p.weights) w = std::uniform_real_distribution<float>(-1, 1)(rng);
        for (auto& b : p.bias) b = std::uniform_real_distribution<float>(-1, 1)(rng);
        const Tensor out = conv2d(in, p);
        for (int c = 0; c < out.channels(); ++c) {
            for (int y = 0; y < out.height(); ++y) {
                for (int x = 0; x < out.width(); ++x) {
                    worst = std::max(worst, std::abs(out.at(c, y, x) - naive_conv_at(in, p, c, y, x)));
                }
            }
        }
        bit_exact = bit_exact && out == serial::conv2d(in, p);
    }
    std::ostringstream d;
    d << "max |diff| vs direct loop " << worst << ", serial==openmp " << (bit_exact ? "yes" : "no");
    return {"conv2d oracle", worst <= 1e-5 && bit_exact, d.str()};
}

SuiteResult suite_shift(std::mt19937& rng) {
    double worst = 0.0;
    std::uniform_int_distribution<int> dim(2, 16), ch(1, 8);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const Tensor in = random_tensor(Shape{ch(rng), dim(rng), dim(rng)}, rng);
        const Shift2D s{unit(rng), unit(rng)};
        std::vector<Coord> coords;
        for (int y = 0; y + 1 < in.height(); ++y) {
            for (int x = 0; x + 1 < in.width(); ++x) coords.push_back({x + s.dx, y + s.dy});
        }
        const Tensor a = bilinear_shift(in, s);
        const Tensor b = grid_sample_bilinear(in, coords, in.height() - 1, in.width() - 1);
        worst = std::max(worst, max_abs_diff(a.data(), b.data()));
    }
    return {"bilinear shift == grid sample (1000 cases)", worst <= 1e-6,
            "max |diff| " + std::to_string(worst)};
}

SuiteResult suite_jit(std::mt19937& rng) {
    double worst = 0.0;
    bool invariant = true;
    bool traces = true;
    std::uniform_int_distribution<int> dim(2, 12), ch(1, 16), rad(1, 3);
    for (int trial = 0; trial < 60; ++trial) {
        const int h = dim(rng), w = dim(rng), d = ch(rng);
        const Tensor f1 = random_tensor(Shape{d, h, w}, rng);
        const Tensor f2 = random_tensor(Shape{d, h, w}, rng);
        FlowField flow(h, w);
        std::uniform_real_distribution<float> fd(-static_cast<float>(w) - 4.0f, static_cast<float>(w) + 4.0f);
        for (auto& v : flow.data()) v = fd(rng);
        const LookupWindow win{rad(rng)};
        const Tensor oracle = lookup_precomputed(build_all_pairs(f1, f2), flow, win);
        const int p = h * w;
        const JitResult base = jit_lookup(f1, f2, flow, win, 1);
        worst = std::max(worst, max_abs_diff(base.features.data(), oracle.data()));
        for (int n : {2, 7, p}) {
            if (n > p) continue;
            const JitResult r = jit_lookup(f1, f2, flow, win, n);
            invariant = invariant && r.features == base.features;
            PipelineConfig c;
            c.height = h * 16;
            c.width = w * 16;
            c.downsample = 16;
            c.feature_dim = d;
            c.radius = win.radius;
            c.n_slice = n;
            traces = traces && static_cast<std::int64_t>(r.trace.peak_gather_bytes) == peak_memory(c).tiled_peak;
        }
        invariant = invariant && serial::jit_lookup(f1, f2, flow, win, 3 > p ? 1 : 3).features == base.features;
    }
    std::ostringstream s;
    s << "max |diff| vs all-pairs " << worst << ", n_slice invariant " << (invariant ? "yes" : "no")
      << ", trace==model " << (traces ? "yes" : "no");
    return {"jit lookup == all-pairs lookup", worst <= 1e-5 && invariant && traces, s.str()};
}

SuiteResult suite_fixtures() {
    bool ok = true;
    std::ostringstream s;
    for (const auto& f : published_fixtures()) {
        const bool pass = fixture_passes(f);
        ok = ok && pass;
        s << f.label << (pass ? " ok; " : " FAILED; ");
    }
    return {"peak-memory fixtures", ok, s.str()};
}

SuiteResult suite_metrics(std::mt19937& rng) {
    FlowField gt(5, 7);
    std::uniform_real_distribution<float> d(-20.0f, 20.0f);
    for (auto& v : gt.data()) v = d(rng);
    FlowField pred = gt;
    for (int y = 0; y < 5; ++y) {
        for (int x = 0; x < 7; ++x) {
            pred.u(y, x) = gt.u(y, x) + 3.0f;
            pred.v(y, x) = gt.v(y, x) + 4.0f;
        }
    }
    FlowField far(4, 4, 1.0f, 0.0f);
    FlowField off(4, 4, 11.0f, 0.0f);
    const bool ok = epe(gt, gt) == 0.0 && std::abs(epe(pred, gt) - 5.0) < 1e-5 && f1_all(gt, gt) == 0.0 &&
                    f1_all(off, far) == 100.0;
    return {"metric identities", ok, "epe(self)=0, 3-4-5 error=5, f1 0%/100%"};
}

SuiteResult suite_schedule() {
    const auto s = make_schedule(12, LookupMode::CoarseToFine, 3).levels();
    const auto t = make_schedule(4, LookupMode::CoarseToFine, 3).levels();
    const bool ok = s == std::vector<int>{2, 2, 2, 2, 1, 1, 1, 1, 0, 0, 0, 0} && t == std::vector<int>{2, 1, 0, 0};
    return {"coarse-to-fine schedule", ok, "12 iterations over 3 levels, remainder to finest"};
}

}  // namespace

std::vector<SuiteResult> run_selftest(std::ostream& log, unsigned seed) {
    std::mt19937 rng(seed);
    std::vector<std::function<SuiteResult()>> suites{
        [&] { return suite_conv(rng); },    [&] { return suite_shift(rng); },
        [&] { return suite_jit(rng); },     [] { return suite_fixtures(); },
        [&] { return suite_metrics(rng); }, [] { return suite_schedule(); },
    };
    std::vector<SuiteResult> results;
    for (auto& suite : suites) {
        const auto t0 = std::chrono::steady_clock::now();
        SuiteResult r;
        try {
            r = suite();
        } catch (const std::exception& e) {
            r = {"(suite threw)", false, e.what()};
        }
        const double ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        log << (r.passed ? "PASS " : "FAIL ") << r.name << " [" << static_cast<long>(ms) << " ms] " << r.detail
            << '\n';
        results.push_back(std::move(r));
    }
    return results;
}

}  // namespace dift
