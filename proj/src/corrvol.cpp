#include "dift/corrvol.hpp"

#include <cmath>

namespace dift {

namespace {
constexpr std::size_t kAllPairsLimit = 4096;
}

FlowDecomposition decompose_flow(double x, double y) noexcept {
    const double fx = std::floor(x);
    const double fy = std::floor(y);
    FlowDecomposition d;
    d.ix = static_cast<std::int64_t>(fx);
    d.iy = static_cast<std::int64_t>(fy);
    d.residue.dx = x - fx;
    d.residue.dy = y - fy;
    // x - floor(x) can round up to 1 for tiny negative x.
    if (d.residue.dx >= 1.0) d.residue.dx = std::nextafter(1.0, 0.0);
    if (d.residue.dy >= 1.0) d.residue.dy = std::nextafter(1.0, 0.0);
    return d;
}

CostVolume4D build_all_pairs(const Tensor& f1, const Tensor& f2) {
    if (f1.channels() != f2.channels()) {
        fail("build_all_pairs: channel mismatch " + std::to_string(f1.channels()) + " vs " +
             std::to_string(f2.channels()));
    }
    const std::size_t p1 = f1.shape().plane();
    const std::size_t p2 = f2.shape().plane();
    if (p1 > kAllPairsLimit || p2 > kAllPairsLimit) {
        fail("build_all_pairs: maps larger than " + std::to_string(kAllPairsLimit) +
             " positions are not materialized; use jit_lookup");
    }
    CostVolume4D vol{f1.height(), f1.width(), f2.height(), f2.width(), std::vector<float>(p1 * p2)};
    const int d = f1.channels();
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t a = 0; a < static_cast<std::ptrdiff_t>(p1); ++a) {
        for (std::size_t b = 0; b < p2; ++b) {
            double acc = 0.0;
            for (int h = 0; h < d; ++h) {
                acc += static_cast<double>(f1.channel(h)[static_cast<std::size_t>(a)]) * f2.channel(h)[b];
            }
            vol.data[static_cast<std::size_t>(a) * p2 + b] = static_cast<float>(acc);
        }
    }
    return vol;
}

FeaturePyramid build_pyramid(const Tensor& features, int levels) {
    require(levels >= 1, "build_pyramid: levels must be >= 1");
    const int div = 1 << (levels - 1);
    if (features.height() % div != 0 || features.width() % div != 0) {
        fail("build_pyramid: dims " + std::to_string(features.height()) + "x" + std::to_string(features.width()) +
             " not divisible by " + std::to_string(div));
    }
    FeaturePyramid pyr;
    pyr.levels.push_back(features);
    for (int p = 1; p < levels; ++p) pyr.levels.push_back(avg_pool2d(pyr.levels.back(), 2));
    return pyr;
}

Tensor lookup_precomputed(const CostVolume4D& volume, const FlowField& flow, const LookupWindow& window) {
    if (flow.height() != volume.h1 || flow.width() != volume.w1) {
        fail("lookup_precomputed: flow " + std::to_string(flow.height()) + "x" + std::to_string(flow.width()) +
             " does not match volume source dims " + std::to_string(volume.h1) + "x" + std::to_string(volume.w1));
    }
    require(window.radius >= 1, "lookup_precomputed: radius must be >= 1");
    const int r = window.radius;
    const int n = window.samples();
    Tensor out(Shape{window.channels(), volume.h1, volume.w1});
    for (int i = 0; i < volume.h1; ++i) {
        for (int j = 0; j < volume.w1; ++j) {
            const auto plane = volume.slice(i, j);
            const double tx = j + static_cast<double>(flow.u(i, j));
            const double ty = i + static_cast<double>(flow.v(i, j));
            for (int a = 0; a < n; ++a) {
                for (int b = 0; b < n; ++b) {
                    out.at(a * n + b, i, j) = static_cast<float>(
                        sample_bilinear(plane, volume.h2, volume.w2, tx + (b - r), ty + (a - r)));
                }
            }
        }
    }
    return out;
}

void correlate_gather(std::span<const float> pixel, std::span<const float> gathered, std::span<double> out) {
    const std::size_t d = pixel.size();
    for (std::size_t cell = 0; cell < out.size(); ++cell) {
        const float* row = gathered.data() + cell * d;
        double acc = 0.0;
        for (std::size_t h = 0; h < d; ++h) acc += static_cast<double>(pixel[h]) * row[h];
        out[cell] = acc;
    }
}

namespace detail {

void check_jit_args(const Tensor& f1, const Tensor& f2_level, const FlowField& flow, const LookupWindow& window,
                    int n_slice, int bytes_per_element) {
    if (f1.channels() != f2_level.channels()) {
        fail("jit_lookup: channel mismatch " + std::to_string(f1.channels()) + " vs " +
             std::to_string(f2_level.channels()));
    }
    if (flow.height() != f1.height() || flow.width() != f1.width()) {
        fail("jit_lookup: flow dims do not match f1 dims " + std::to_string(f1.height()) + "x" +
             std::to_string(f1.width()));
    }
    require(window.radius >= 1, "jit_lookup: radius must be >= 1");
    const auto pixels = f1.shape().plane();
    if (n_slice < 1 || static_cast<std::size_t>(n_slice) > pixels) {
        fail("jit_lookup: n_slice " + std::to_string(n_slice) + " outside [1, " + std::to_string(pixels) + "]");
    }
    require(bytes_per_element >= 1, "jit_lookup: bytes_per_element must be positive");
}

MemoryTrace plan_tiles(std::size_t pixels, const LookupWindow& window, int channels, int n_slice,
                       int bytes_per_element) {
    MemoryTrace t;
    t.n_slice = n_slice;
    t.bytes_per_element = bytes_per_element;
    t.max_tile_pixels = (pixels + static_cast<std::size_t>(n_slice) - 1) / static_cast<std::size_t>(n_slice);
    t.tiles = static_cast<int>((pixels + t.max_tile_pixels - 1) / t.max_tile_pixels);
    const std::size_t elements =
        t.max_tile_pixels * static_cast<std::size_t>(window.gather_cells()) * static_cast<std::size_t>(channels);
    t.peak_gather_bytes = elements * static_cast<std::size_t>(bytes_per_element);
    t.allocated_bytes = elements * sizeof(float);
    return t;
}

void gather_cells(const Tensor& f2, const FlowDecomposition& cell, const LookupWindow& window, std::span<float> dst) {
    const int g = window.gather_width();
    const int d = f2.channels();
    const std::int64_t y0 = cell.iy - window.radius;
    const std::int64_t x0 = cell.ix - window.radius;
    for (int a = 0; a < g; ++a) {
        const std::int64_t yy = y0 + a;
        for (int b = 0; b < g; ++b) {
            const std::int64_t xx = x0 + b;
            float* row = dst.data() + static_cast<std::size_t>(a * g + b) * d;
            if (yy < 0 || xx < 0 || yy >= f2.height() || xx >= f2.width()) {
                std::fill(row, row + d, 0.0f);
                continue;
            }
            for (int h = 0; h < d; ++h) row[h] = f2.at(h, static_cast<int>(yy), static_cast<int>(xx));
        }
    }
}

void finish_pixel(std::span<const float> pixel_feature, std::span<const float> gathered, Shift2D residue,
                  const LookupWindow& window, std::span<double> corr, std::span<double> scratch,
                  std::span<double> shifted) {
    correlate_gather(pixel_feature, gathered, corr);
    shift_plane(corr, window.gather_width(), window.gather_width(), residue, scratch, shifted);
}

}  // namespace detail

JitResult jit_lookup(const Tensor& f1, const Tensor& f2_level, const FlowField& flow, const LookupWindow& window,
                     int n_slice, int bytes_per_element) {
    detail::check_jit_args(f1, f2_level, flow, window, n_slice, bytes_per_element);
    const std::size_t pixels = f1.shape().plane();
    const int d = f1.channels();
    const int w1 = f1.width();
    const std::size_t cells = static_cast<std::size_t>(window.gather_cells());
    const std::size_t row_elems = cells * static_cast<std::size_t>(d);

    JitResult result{Tensor(Shape{window.channels(), f1.height(), w1}), detail::plan_tiles(pixels, window, d, n_slice,
                                                                                          bytes_per_element)};
    const std::size_t tile = result.trace.max_tile_pixels;
    // The only buffer that scales with the tile: gathered f2 features.
    std::vector<float> gathered(tile * row_elems);
    std::vector<FlowDecomposition> cellpos(tile);
    auto& out = result.features;
    const std::size_t plane = pixels;

    for (std::size_t begin = 0; begin < pixels; begin += tile) {
        const std::size_t count = std::min(tile, pixels - begin);

#pragma omp parallel
        {
            std::vector<float> feature(static_cast<std::size_t>(d));
            std::vector<double> corr(cells);
            std::vector<double> scratch(static_cast<std::size_t>(window.gather_width()) * window.samples());
            std::vector<double> shifted(static_cast<std::size_t>(window.channels()));

#pragma omp for schedule(static)
            for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(count); ++k) {
                const std::size_t p = begin + static_cast<std::size_t>(k);
                const int y = static_cast<int>(p / static_cast<std::size_t>(w1));
                const int x = static_cast<int>(p % static_cast<std::size_t>(w1));
                const auto cell = decompose_flow(x + static_cast<double>(flow.u(y, x)),
                                                 y + static_cast<double>(flow.v(y, x)));
                cellpos[static_cast<std::size_t>(k)] = cell;
                detail::gather_cells(f2_level, cell, window,
                                     std::span<float>(gathered).subspan(static_cast<std::size_t>(k) * row_elems, row_elems));
            }

#pragma omp for schedule(static)
            for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(count); ++k) {
                const std::size_t p = begin + static_cast<std::size_t>(k);
                for (int h = 0; h < d; ++h) feature[static_cast<std::size_t>(h)] = f1.channel(h)[p];
                detail::finish_pixel(feature,
                                     std::span<const float>(gathered).subspan(static_cast<std::size_t>(k) * row_elems,
                                                                              row_elems),
                                     cellpos[static_cast<std::size_t>(k)].residue, window, corr, scratch, shifted);
                auto dst = out.data();
                for (std::size_t c = 0; c < shifted.size(); ++c) dst[c * plane + p] = static_cast<float>(shifted[c]);
            }
        }
    }
    return result;
}

}  // namespace dift
