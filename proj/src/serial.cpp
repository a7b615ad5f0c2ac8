#include "dift/serial.hpp"

namespace dift::serial {

Tensor conv2d(const Tensor& input, const ConvParams& params) {
    const Shape os = params.output_shape(input.shape());
    Tensor out(os);
    for (int oc = 0; oc < os.channels; ++oc) {
        for (int oy = 0; oy < os.height; ++oy) {
            for (int ox = 0; ox < os.width; ++ox) {
                double acc = 0.0;
                for (int ic = 0; ic < params.in_channels; ++ic) {
                    for (int ky = 0; ky < params.kernel_h; ++ky) {
                        const int iy = oy * params.stride - params.padding + ky;
                        if (iy < 0 || iy >= input.height()) continue;
                        for (int kx = 0; kx < params.kernel_w; ++kx) {
                            const int ix = ox * params.stride - params.padding + kx;
                            if (ix < 0 || ix >= input.width()) continue;
                            acc += static_cast<double>(params.weight(oc, ic, ky, kx)) * input.at(ic, iy, ix);
                        }
                    }
                }
                out.at(oc, oy, ox) = static_cast<float>(acc + params.bias[static_cast<std::size_t>(oc)]);
            }
        }
    }
    return out;
}

Tensor avg_pool2d(const Tensor& input, int window) {
    require(window > 0, "avg_pool2d: window must be positive");
    if (input.height() % window != 0 || input.width() % window != 0) {
        fail("avg_pool2d: dims not divisible by window " + std::to_string(window));
    }
    Tensor out(Shape{input.channels(), input.height() / window, input.width() / window});
    const double count = static_cast<double>(window) * window;
    for (int c = 0; c < out.channels(); ++c) {
        for (int y = 0; y < out.height(); ++y) {
            for (int x = 0; x < out.width(); ++x) {
                double sum = 0.0;
                for (int dy = 0; dy < window; ++dy) {
                    for (int dx = 0; dx < window; ++dx) sum += input.at(c, y * window + dy, x * window + dx);
                }
                out.at(c, y, x) = static_cast<float>(sum / count);
            }
        }
    }
    return out;
}

JitResult jit_lookup(const Tensor& f1, const Tensor& f2_level, const FlowField& flow, const LookupWindow& window,
                     int n_slice, int bytes_per_element) {
    detail::check_jit_args(f1, f2_level, flow, window, n_slice, bytes_per_element);
    const std::size_t pixels = f1.shape().plane();
    const int d = f1.channels();
    const std::size_t cells = static_cast<std::size_t>(window.gather_cells());
    const std::size_t row_elems = cells * static_cast<std::size_t>(d);

    JitResult result{Tensor(Shape{window.channels(), f1.height(), f1.width()}),
                     detail::plan_tiles(pixels, window, d, n_slice, bytes_per_element)};
    const std::size_t tile = result.trace.max_tile_pixels;
    std::vector<float> gathered(tile * row_elems);
    std::vector<float> feature(static_cast<std::size_t>(d));
    std::vector<double> corr(cells);
    std::vector<double> scratch(static_cast<std::size_t>(window.gather_width()) * window.samples());
    std::vector<double> shifted(static_cast<std::size_t>(window.channels()));

    for (std::size_t begin = 0; begin < pixels; begin += tile) {
        const std::size_t count = std::min(tile, pixels - begin);
        for (std::size_t k = 0; k < count; ++k) {
            const std::size_t p = begin + k;
            const int y = static_cast<int>(p / static_cast<std::size_t>(f1.width()));
            const int x = static_cast<int>(p % static_cast<std::size_t>(f1.width()));
            const auto cell =
                decompose_flow(x + static_cast<double>(flow.u(y, x)), y + static_cast<double>(flow.v(y, x)));
            auto slot = std::span<float>(gathered).subspan(k * row_elems, row_elems);
            detail::gather_cells(f2_level, cell, window, slot);
            for (int h = 0; h < d; ++h) feature[static_cast<std::size_t>(h)] = f1.at(h, y, x);
            detail::finish_pixel(feature, slot, cell.residue, window, corr, scratch, shifted);
            for (std::size_t c = 0; c < shifted.size(); ++c) {
                result.features.at(static_cast<int>(c), y, x) = static_cast<float>(shifted[c]);
            }
        }
    }
    return result;
}

}  // namespace dift::serial
