#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dift/sampling.hpp"
#include "dift/tensor.hpp"

namespace dift {

// Dense all-pairs correlation C[i][j][k][l] = sum_h f1[h][i][j] * f2[h][k][l].
// Only meant for small maps; it is the oracle for the tiled lookup.
struct CostVolume4D {
    int h1 = 0, w1 = 0, h2 = 0, w2 = 0;
    std::vector<float> data;

    [[nodiscard]] float at(int i, int j, int k, int l) const noexcept {
        return data[((static_cast<std::size_t>(i) * w1 + j) * h2 + k) * w2 + l];
    }
    // Correlation of source pixel (i, j) against every target pixel, h2 x w2.
    [[nodiscard]] std::span<const float> slice(int i, int j) const noexcept {
        const std::size_t plane = static_cast<std::size_t>(h2) * w2;
        return std::span<const float>(data).subspan((static_cast<std::size_t>(i) * w1 + j) * plane, plane);
    }
};

// Level p has dims (H / 2^p, W / 2^p); level p + 1 = avg_pool2d(level p, 2).
struct FeaturePyramid {
    std::vector<Tensor> levels;

    [[nodiscard]] int depth() const noexcept { return static_cast<int>(levels.size()); }
    [[nodiscard]] const Tensor& level(int p) const { return levels.at(static_cast<std::size_t>(p)); }
};

// Square neighbourhood of (2r + 1)^2 samples around the flow target. The
// integer gather spans 2r + 2 cells per axis so a sub-pixel shift can consume one.
struct LookupWindow {
    int radius = 3;

    [[nodiscard]] int samples() const noexcept { return 2 * radius + 1; }
    [[nodiscard]] int gather_width() const noexcept { return 2 * radius + 2; }
    [[nodiscard]] int channels() const noexcept { return samples() * samples(); }
    [[nodiscard]] int gather_cells() const noexcept { return gather_width() * gather_width(); }
};

struct FlowDecomposition {
    std::int64_t ix = 0;
    std::int64_t iy = 0;
    Shift2D residue;
};

// Floor split of a real target position into integer cell and [0, 1) residue.
FlowDecomposition decompose_flow(double x, double y) noexcept;

struct MemoryTrace {
    int n_slice = 0;
    int tiles = 0;                      // tiles actually processed
    std::size_t max_tile_pixels = 0;    // ceil(P / n_slice)
    std::size_t peak_gather_bytes = 0;  // max_tile_pixels * (2r+2)^2 * D * bytes_per_element
    std::size_t allocated_bytes = 0;    // what this build actually holds (32-bit floats)
    int bytes_per_element = 1;
};

struct JitResult {
    Tensor features;  // (2r+1)^2 x H1 x W1
    MemoryTrace trace;
};

CostVolume4D build_all_pairs(const Tensor& f1, const Tensor& f2);

FeaturePyramid build_pyramid(const Tensor& features, int levels);

// Correlation features from a materialized volume. flow is in units of the
// volume's level; taps outside the target map read zero. Channel order is
// row-major over (dy, dx) offsets from (-r, -r) to (r, r).
Tensor lookup_precomputed(const CostVolume4D& volume, const FlowField& flow, const LookupWindow& window);

// Dot products of one pixel's feature against each gathered row.
// gathered is cells x D (row-major), out receives cells values.
void correlate_gather(std::span<const float> pixel, std::span<const float> gathered, std::span<double> out);

// Tiled just-in-time lookup. Pixels of f1 are processed in contiguous
// row-major tiles of ceil(P / n_slice) pixels; per tile the integer-grid
// neighbourhood of f2_level is gathered, correlated and bilinear-shifted.
// Output is independent of n_slice, bit for bit.
JitResult jit_lookup(const Tensor& f1, const Tensor& f2_level, const FlowField& flow, const LookupWindow& window,
                     int n_slice, int bytes_per_element = 1);

namespace detail {
void check_jit_args(const Tensor& f1, const Tensor& f2_level, const FlowField& flow, const LookupWindow& window,
                    int n_slice, int bytes_per_element);
MemoryTrace plan_tiles(std::size_t pixels, const LookupWindow& window, int channels, int n_slice,
                       int bytes_per_element);
// Copies the (2r+2)^2 x D neighbourhood of f2 anchored at the decomposed
// cell into dst (zeros out of bounds).
void gather_cells(const Tensor& f2, const FlowDecomposition& cell, const LookupWindow& window, std::span<float> dst);
// Correlate + shift for one pixel; shifted receives the (2r+1)^2 features.
void finish_pixel(std::span<const float> pixel_feature, std::span<const float> gathered, Shift2D residue,
                  const LookupWindow& window, std::span<double> corr, std::span<double> scratch,
                  std::span<double> shifted);
}  // namespace detail

}  // namespace dift
