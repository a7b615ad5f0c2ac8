#include "dift/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace dift {

std::string to_string(const Shape& s) {
    return std::to_string(s.channels) + "x" + std::to_string(s.height) + "x" + std::to_string(s.width);
}

Tensor::Tensor(Shape shape, float fill) : shape_(shape) {
    require(shape.channels > 0 && shape.height > 0 && shape.width > 0,
            "tensor shape must be positive, got " + to_string(shape));
    data_.assign(shape.size(), fill);
}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(shape), data_(std::move(data)) {
    require(shape.channels > 0 && shape.height > 0 && shape.width > 0,
            "tensor shape must be positive, got " + to_string(shape));
    require(data_.size() == shape.size(), "tensor data length " + std::to_string(data_.size()) +
                                              " does not match shape " + to_string(shape));
}

std::span<float> Tensor::channel(int c) noexcept {
    return std::span<float>(data_).subspan(static_cast<std::size_t>(c) * shape_.plane(), shape_.plane());
}

std::span<const float> Tensor::channel(int c) const noexcept {
    return std::span<const float>(data_).subspan(static_cast<std::size_t>(c) * shape_.plane(), shape_.plane());
}

FlowField::FlowField(int height, int width, float u, float v) : height_(height), width_(width) {
    require(height > 0 && width > 0, "flow field dims must be positive");
    data_.resize(2 * pixels());
    for (std::size_t i = 0; i < pixels(); ++i) {
        data_[2 * i] = u;
        data_[2 * i + 1] = v;
    }
}

Tensor FlowField::to_tensor() const {
    Tensor t(Shape{2, height_, width_});
    auto us = t.channel(0);
    auto vs = t.channel(1);
    for (std::size_t i = 0; i < pixels(); ++i) {
        us[i] = data_[2 * i];
        vs[i] = data_[2 * i + 1];
    }
    return t;
}

FlowField FlowField::from_tensor(const Tensor& t) {
    require(t.channels() == 2, "flow tensor needs 2 channels, got " + std::to_string(t.channels()));
    FlowField f(t.height(), t.width());
    auto us = t.channel(0);
    auto vs = t.channel(1);
    for (std::size_t i = 0; i < f.pixels(); ++i) {
        f.data_[2 * i] = us[i];
        f.data_[2 * i + 1] = vs[i];
    }
    return f;
}

ConvParams ConvParams::zeros(int out_channels, int in_channels, int kernel, int stride, int padding) {
    ConvParams p;
    p.out_channels = out_channels;
    p.in_channels = in_channels;
    p.kernel_h = kernel;
    p.kernel_w = kernel;
    p.stride = stride;
    p.padding = padding;
    p.weights.assign(static_cast<std::size_t>(out_channels) * in_channels * kernel * kernel, 0.0f);
    p.bias.assign(static_cast<std::size_t>(out_channels), 0.0f);
    return p;
}

void ConvParams::validate() const {
    require(out_channels > 0 && in_channels > 0 && kernel_h > 0 && kernel_w > 0,
            "conv dims must be positive");
    require(stride > 0, "conv stride must be positive");
    require(padding >= 0, "conv padding must be non-negative");
    require(weights.size() == static_cast<std::size_t>(out_channels) * fan_in(),
            "conv weight count " + std::to_string(weights.size()) + " does not match " +
                std::to_string(out_channels) + "x" + std::to_string(in_channels) + "x" +
                std::to_string(kernel_h) + "x" + std::to_string(kernel_w));
    require(bias.size() == static_cast<std::size_t>(out_channels),
            "conv bias length " + std::to_string(bias.size()) + " does not match out-channels " +
                std::to_string(out_channels));
}

Shape ConvParams::output_shape(const Shape& input) const {
    validate();
    if (input.channels != in_channels) {
        fail("conv2d: input channels " + std::to_string(input.channels) + " != kernel in-channels " +
             std::to_string(in_channels));
    }
    const int oh = (input.height + 2 * padding - kernel_h) / stride + 1;
    const int ow = (input.width + 2 * padding - kernel_w) / stride + 1;
    if (input.height + 2 * padding < kernel_h || oh < 1) {
        fail("conv2d: output height < 1 for input height " + std::to_string(input.height));
    }
    if (input.width + 2 * padding < kernel_w || ow < 1) {
        fail("conv2d: output width < 1 for input width " + std::to_string(input.width));
    }
    return Shape{out_channels, oh, ow};
}

Tensor conv2d(const Tensor& input, const ConvParams& params) {
    const Shape os = params.output_shape(input.shape());
    Tensor out(os);
    const int ih = input.height();
    const int iw = input.width();
    const int s = params.stride;
    const int pad = params.padding;
    const auto in = input.data();
    const std::size_t oplane = os.plane();

    // Per output channel: accumulate taps in (ic, ky, kx) order into a double
    // plane, then add bias. Matches serial::conv2d's per-element order.
#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < os.channels; ++oc) {
        std::vector<double> acc(oplane, 0.0);
        for (int ic = 0; ic < params.in_channels; ++ic) {
            const float* src = in.data() + static_cast<std::size_t>(ic) * input.shape().plane();
            for (int ky = 0; ky < params.kernel_h; ++ky) {
                for (int kx = 0; kx < params.kernel_w; ++kx) {
                    const double w = params.weight(oc, ic, ky, kx);
                    for (int oy = 0; oy < os.height; ++oy) {
                        const int iy = oy * s - pad + ky;
                        if (iy < 0 || iy >= ih) continue;
                        const float* row = src + static_cast<std::size_t>(iy) * iw;
                        double* dst = acc.data() + static_cast<std::size_t>(oy) * os.width;
                        for (int ox = 0; ox < os.width; ++ox) {
                            const int ix = ox * s - pad + kx;
                            if (ix < 0 || ix >= iw) continue;
                            dst[ox] += w * static_cast<double>(row[ix]);
                        }
                    }
                }
            }
        }
        const double b = params.bias[static_cast<std::size_t>(oc)];
        auto dst = out.channel(oc);
        for (std::size_t i = 0; i < oplane; ++i) dst[i] = static_cast<float>(acc[i] + b);
    }
    return out;
}

Tensor avg_pool2d(const Tensor& input, int window) {
    require(window > 0, "avg_pool2d: window must be positive");
    if (input.height() % window != 0 || input.width() % window != 0) {
        fail("avg_pool2d: dims " + std::to_string(input.height()) + "x" + std::to_string(input.width()) +
             " not divisible by window " + std::to_string(window) + "; pad first");
    }
    const int oh = input.height() / window;
    const int ow = input.width() / window;
    const int channels = input.channels();
    Tensor out(Shape{channels, oh, ow});
    const double count = static_cast<double>(window) * window;
#pragma omp parallel for collapse(2) schedule(static)
    for (int c = 0; c < channels; ++c) {
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                double sum = 0.0;
                for (int dy = 0; dy < window; ++dy) {
                    for (int dx = 0; dx < window; ++dx) {
                        sum += input.at(c, y * window + dy, x * window + dx);
                    }
                }
                out.at(c, y, x) = static_cast<float>(sum / count);
            }
        }
    }
    return out;
}

Tensor elementwise(const Tensor& input, Activation kind) {
    Tensor out(input.shape());
    const auto src = input.data();
    auto dst = out.data();
    const auto n = static_cast<std::ptrdiff_t>(src.size());
    switch (kind) {
        case Activation::Relu:
            for (std::ptrdiff_t i = 0; i < n; ++i) dst[i] = src[i] > 0.0f ? src[i] : 0.0f;
            break;
        case Activation::Tanh:
            for (std::ptrdiff_t i = 0; i < n; ++i) dst[i] = static_cast<float>(std::tanh(double{src[i]}));
            break;
        case Activation::Sigmoid:
            for (std::ptrdiff_t i = 0; i < n; ++i) {
                dst[i] = static_cast<float>(1.0 / (1.0 + std::exp(-double{src[i]})));
            }
            break;
    }
    return out;
}

Tensor concat_channels(std::span<const Tensor> parts) {
    require(!parts.empty(), "concat_channels: no parts");
    const int h = parts.front().height();
    const int w = parts.front().width();
    int channels = 0;
    for (const auto& p : parts) {
        if (p.height() != h || p.width() != w) {
            fail("concat_channels: spatial mismatch " + to_string(p.shape()) + " vs " +
                 to_string(parts.front().shape()));
        }
        channels += p.channels();
    }
    std::vector<float> data;
    data.reserve(static_cast<std::size_t>(channels) * h * w);
    for (const auto& p : parts) data.insert(data.end(), p.data().begin(), p.data().end());
    return Tensor(Shape{channels, h, w}, std::move(data));
}

Tensor concat_channels(std::initializer_list<const Tensor*> parts) {
    std::vector<Tensor> copies;
    copies.reserve(parts.size());
    for (const Tensor* p : parts) copies.push_back(*p);
    return concat_channels(std::span<const Tensor>(copies));
}

Tensor slice_channels(const Tensor& input, int begin, int count) {
    require(begin >= 0 && count > 0 && begin + count <= input.channels(),
            "slice_channels: range [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                ") outside " + std::to_string(input.channels()) + " channels");
    const auto plane = input.shape().plane();
    const auto first = input.data().begin() + static_cast<std::ptrdiff_t>(begin * plane);
    std::vector<float> data(first, first + static_cast<std::ptrdiff_t>(count * plane));
    return Tensor(Shape{count, input.height(), input.width()}, std::move(data));
}

Tensor instance_norm(const Tensor& input, double eps) {
    Tensor out(input.shape());
    const auto plane = input.shape().plane();
#pragma omp parallel for schedule(static)
    for (int c = 0; c < input.channels(); ++c) {
        const auto src = input.channel(c);
        double mean = 0.0;
        for (float v : src) mean += v;
        mean /= static_cast<double>(plane);
        double var = 0.0;
        for (float v : src) var += (v - mean) * (v - mean);
        var /= static_cast<double>(plane);
        const double inv = 1.0 / std::sqrt(var + eps);
        auto dst = out.channel(c);
        for (std::size_t i = 0; i < plane; ++i) dst[i] = static_cast<float>((src[i] - mean) * inv);
    }
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    require(a.shape() == b.shape(), "add: shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
    return out;
}

Tensor scale(const Tensor& a, float factor) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * factor;
    return out;
}

Tensor pad_to(const Tensor& input, int height, int width) {
    require(height >= input.height() && width >= input.width(), "pad_to: target smaller than input");
    Tensor out(Shape{input.channels(), height, width});
    for (int c = 0; c < input.channels(); ++c) {
        for (int y = 0; y < input.height(); ++y) {
            for (int x = 0; x < input.width(); ++x) out.at(c, y, x) = input.at(c, y, x);
        }
    }
    return out;
}

Tensor crop(const Tensor& input, int height, int width) {
    require(height > 0 && width > 0 && height <= input.height() && width <= input.width(),
            "crop: target outside input");
    Tensor out(Shape{input.channels(), height, width});
    for (int c = 0; c < input.channels(); ++c) {
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) out.at(c, y, x) = input.at(c, y, x);
        }
    }
    return out;
}

Tensor resize_bilinear(const Tensor& input, int height, int width) {
    require(height > 0 && width > 0, "resize_bilinear: target dims must be positive");
    if (height == input.height() && width == input.width()) return input;
    Tensor out(Shape{input.channels(), height, width});
    const double sy = static_cast<double>(input.height()) / height;
    const double sx = static_cast<double>(input.width()) / width;
    const int ih = input.height();
    const int iw = input.width();
    for (int y = 0; y < height; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        fy = std::clamp(fy, 0.0, static_cast<double>(ih - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, ih - 1);
        const double wy = fy - y0;
        for (int x = 0; x < width; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            fx = std::clamp(fx, 0.0, static_cast<double>(iw - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, iw - 1);
            const double wx = fx - x0;
            for (int c = 0; c < input.channels(); ++c) {
                const double top = (1.0 - wx) * input.at(c, y0, x0) + wx * input.at(c, y0, x1);
                const double bot = (1.0 - wx) * input.at(c, y1, x0) + wx * input.at(c, y1, x1);
                out.at(c, y, x) = static_cast<float>((1.0 - wy) * top + wy * bot);
            }
        }
    }
    return out;
}

}  // namespace dift
