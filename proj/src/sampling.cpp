#include "dift/sampling.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>

namespace dift {

double sample_bilinear(std::span<const float> plane, int height, int width, double x, double y) noexcept {
    const double fx = std::floor(x);
    const double fy = std::floor(y);
    const double wx = x - fx;
    const double wy = y - fy;
    const auto x0 = static_cast<long long>(fx);
    const auto y0 = static_cast<long long>(fy);
    auto tap = [&](long long yy, long long xx) -> double {
        if (xx < 0 || yy < 0 || xx >= width || yy >= height) return 0.0;
        return plane[static_cast<std::size_t>(yy) * static_cast<std::size_t>(width) + static_cast<std::size_t>(xx)];
    };
    const double w00 = (1.0 - wy) * (1.0 - wx);
    const double w01 = (1.0 - wy) * wx;
    const double w10 = wy * (1.0 - wx);
    const double w11 = wy * wx;
    // Zero-weight taps are skipped so integer positions reproduce stored values exactly.
    double acc = 0.0;
    if (w00 != 0.0) acc += w00 * tap(y0, x0);
    if (w01 != 0.0) acc += w01 * tap(y0, x0 + 1);
    if (w10 != 0.0) acc += w10 * tap(y0 + 1, x0);
    if (w11 != 0.0) acc += w11 * tap(y0 + 1, x0 + 1);
    return acc;
}

Tensor grid_sample_bilinear(const Tensor& input, std::span<const Coord> coords, int out_height, int out_width) {
    require(out_height > 0 && out_width > 0, "grid_sample_bilinear: output dims must be positive");
    require(coords.size() == static_cast<std::size_t>(out_height) * static_cast<std::size_t>(out_width),
            "grid_sample_bilinear: expected " + std::to_string(out_height * out_width) + " coords, got " +
                std::to_string(coords.size()));
    Tensor out(Shape{input.channels(), out_height, out_width});
    for (int c = 0; c < input.channels(); ++c) {
        const auto plane = input.channel(c);
        auto dst = out.channel(c);
        for (std::size_t i = 0; i < coords.size(); ++i) {
            dst[i] = static_cast<float>(sample_bilinear(plane, input.height(), input.width(), coords[i].x, coords[i].y));
        }
    }
    return out;
}

namespace detail {

void shift_plane(std::span<const double> in, int height, int width, Shift2D shift, std::span<double> scratch,
                 std::span<double> out) noexcept {
    const int ow = width - 1;
    const int oh = height - 1;
    const double ax = 1.0 - shift.dx;
    const double bx = shift.dx;
    // x pass: T2 = (1 - dx) * T[:, 0:w-2] + dx * T[:, 1:w-1]
    for (int y = 0; y < height; ++y) {
        const double* row = in.data() + static_cast<std::size_t>(y) * width;
        double* dst = scratch.data() + static_cast<std::size_t>(y) * ow;
        for (int x = 0; x < ow; ++x) dst[x] = ax * row[x] + bx * row[x + 1];
    }
    const double ay = 1.0 - shift.dy;
    const double by = shift.dy;
    // y pass on T2
    for (int y = 0; y < oh; ++y) {
        const double* r0 = scratch.data() + static_cast<std::size_t>(y) * ow;
        const double* r1 = r0 + ow;
        double* dst = out.data() + static_cast<std::size_t>(y) * ow;
        for (int x = 0; x < ow; ++x) dst[x] = ay * r0[x] + by * r1[x];
    }
}

}  // namespace detail

Tensor bilinear_shift(const Tensor& input, Shift2D shift) {
    if (input.height() < 2 || input.width() < 2) {
        fail("bilinear_shift: needs H >= 2 and W >= 2, got " + to_string(input.shape()));
    }
    require(shift.valid(), "bilinear_shift: shift components must lie in [0, 1)");
    const int h = input.height();
    const int w = input.width();
    Tensor out(Shape{input.channels(), h - 1, w - 1});
    std::vector<double> plane(static_cast<std::size_t>(h) * w);
    std::vector<double> scratch(static_cast<std::size_t>(h) * (w - 1));
    std::vector<double> result(static_cast<std::size_t>(h - 1) * (w - 1));
    for (int c = 0; c < input.channels(); ++c) {
        const auto src = input.channel(c);
        std::copy(src.begin(), src.end(), plane.begin());
        detail::shift_plane(plane, h, w, shift, scratch, result);
        auto dst = out.channel(c);
        for (std::size_t i = 0; i < result.size(); ++i) dst[i] = static_cast<float>(result[i]);
    }
    return out;
}

namespace {

Tensor random_tensor(Shape s, std::mt19937& rng) {
    std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
    Tensor t(s);
    for (auto& v : t.data()) v = dist(rng);
    return t;
}

std::vector<Coord> shifted_grid(int out_h, int out_w, Shift2D shift) {
    std::vector<Coord> coords;
    coords.reserve(static_cast<std::size_t>(out_h) * out_w);
    for (int y = 0; y < out_h; ++y) {
        for (int x = 0; x < out_w; ++x) coords.push_back({x + shift.dx, y + shift.dy});
    }
    return coords;
}

template <typename F>
double mean_ns(int reps, F&& fn) {
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    for (int i = 0; i < reps; ++i) fn();
    const auto t1 = clock::now();
    return std::chrono::duration<double, std::nano>(t1 - t0).count() / reps;
}

}  // namespace

SamplerBenchReport bench_samplers(std::span<const Shape> sizes, int repetitions, unsigned seed) {
    require(repetitions >= 1, "bench_samplers: repetitions must be >= 1");
    SamplerBenchReport report;
    report.repetitions = repetitions;
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (const Shape& s : sizes) {
        require(s.height >= 2 && s.width >= 2, "bench_samplers: shapes need H, W >= 2");
        const Tensor input = random_tensor(s, rng);
        const Shift2D shift{unit(rng), unit(rng)};
        const auto coords = shifted_grid(s.height - 1, s.width - 1, shift);

        SamplerBenchRow row;
        row.shape = s;
        const Tensor a = bilinear_shift(input, shift);
        const Tensor b = grid_sample_bilinear(input, coords, s.height - 1, s.width - 1);
        for (std::size_t i = 0; i < a.size(); ++i) {
            row.max_abs_diff = std::max(row.max_abs_diff, static_cast<double>(std::abs(a.data()[i] - b.data()[i])));
        }
        if (row.max_abs_diff > 1e-6) report.guard_passed = false;

        volatile float sink = 0.0f;
        row.shift_ns = mean_ns(repetitions, [&] { sink = sink + bilinear_shift(input, shift).data()[0]; });
        row.grid_ns = mean_ns(repetitions, [&] {
            sink = sink + grid_sample_bilinear(input, coords, s.height - 1, s.width - 1).data()[0];
        });
        report.rows.push_back(row);
    }
    return report;
}

void print_bench_table(std::ostream& os, const SamplerBenchReport& report) {
    os << "sampler benchmark (" << report.repetitions << " reps, single thread)\n";
    os << std::left << std::setw(14) << "shape" << std::right << std::setw(16) << "shift ns/op" << std::setw(16)
       << "grid ns/op" << std::setw(10) << "ratio" << std::setw(14) << "max |diff|" << '\n';
    for (const auto& r : report.rows) {
        os << std::left << std::setw(14) << to_string(r.shape) << std::right << std::fixed << std::setprecision(1)
           << std::setw(16) << r.shift_ns << std::setw(16) << r.grid_ns << std::setprecision(2) << std::setw(10)
           << r.speedup() << std::scientific << std::setprecision(2) << std::setw(14) << r.max_abs_diff << '\n'
           << std::defaultfloat;
    }
    os << "equivalence guard: " << (report.guard_passed ? "PASS" : "FAIL") << '\n';
    os << "reference point: 8x throughput reported on a mobile accelerator simulator "
          "(12277.3 vs 1483.2 inf/s); desk ratios are informational only\n";
}

void print_bench_csv(std::ostream& os, const SamplerBenchReport& report) {
    os << "channels,height,width,shift_ns,grid_ns,ratio,max_abs_diff\n";
    for (const auto& r : report.rows) {
        os << r.shape.channels << ',' << r.shape.height << ',' << r.shape.width << ',' << r.shift_ns << ','
           << r.grid_ns << ',' << r.speedup() << ',' << r.max_abs_diff << '\n';
    }
}

}  // namespace dift
