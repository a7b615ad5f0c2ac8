#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "dift/tensor.hpp"

namespace dift {

// Sub-pixel residue of a sampling position, each component in [0, 1).
struct Shift2D {
    double dx = 0.0;
    double dy = 0.0;

    [[nodiscard]] bool valid() const noexcept { return dx >= 0.0 && dx < 1.0 && dy >= 0.0 && dy < 1.0; }
};

struct Coord {
    double x = 0.0;
    double y = 0.0;
};

// Four-tap bilinear sample of one channel plane; taps outside the plane read 0.
double sample_bilinear(std::span<const float> plane, int height, int width, double x, double y) noexcept;

// Reference sampler. coords holds out_height * out_width positions in
// row-major order; the result is channels x out_height x out_width.
Tensor grid_sample_bilinear(const Tensor& input, std::span<const Coord> coords, int out_height, int out_width);

// Bilinear shift: blend two one-pixel-offset views along x with weights
// (1 - dx, dx), then the same along y with (1 - dy, dy). Output is
// C x (H - 1) x (W - 1); requires H, W >= 2 and a shift in [0, 1).
Tensor bilinear_shift(const Tensor& input, Shift2D shift);

namespace detail {
// Single-plane bilinear shift on a double buffer of height x width, writing
// (height - 1) x (width - 1) values into out. scratch must hold
// height * (width - 1) values. Shared with the correlation lookup.
void shift_plane(std::span<const double> in, int height, int width, Shift2D shift, std::span<double> scratch,
                 std::span<double> out) noexcept;
}  // namespace detail

struct SamplerBenchRow {
    Shape shape;
    double shift_ns = 0.0;  // mean per call
    double grid_ns = 0.0;
    double max_abs_diff = 0.0;
    [[nodiscard]] double speedup() const noexcept { return shift_ns > 0.0 ? grid_ns / shift_ns : 0.0; }
};

struct SamplerBenchReport {
    std::vector<SamplerBenchRow> rows;
    bool guard_passed = true;  // both samplers agreed within 1e-6 before timing
    int repetitions = 0;
};

// Times both samplers on random inputs of each shape. Single-threaded.
SamplerBenchReport bench_samplers(std::span<const Shape> sizes, int repetitions, unsigned seed = 7);

void print_bench_table(std::ostream& os, const SamplerBenchReport& report);
void print_bench_csv(std::ostream& os, const SamplerBenchReport& report);

}  // namespace dift
