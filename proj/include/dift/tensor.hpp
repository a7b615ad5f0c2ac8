#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dift/error.hpp"

namespace dift {

struct Shape {
    int channels = 0;
    int height = 0;
    int width = 0;

    [[nodiscard]] std::size_t size() const noexcept {
        return static_cast<std::size_t>(channels) * static_cast<std::size_t>(height) *
               static_cast<std::size_t>(width);
    }
    [[nodiscard]] std::size_t plane() const noexcept {
        return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
    }
    friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

// Dense channels x height x width array of floats, width fastest.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, float fill = 0.0f);
    Tensor(Shape shape, std::vector<float> data);

    [[nodiscard]] const Shape& shape() const noexcept { return shape_; }
    [[nodiscard]] int channels() const noexcept { return shape_.channels; }
    [[nodiscard]] int height() const noexcept { return shape_.height; }
    [[nodiscard]] int width() const noexcept { return shape_.width; }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
    [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

    [[nodiscard]] std::span<float> data() noexcept { return data_; }
    [[nodiscard]] std::span<const float> data() const noexcept { return data_; }
    [[nodiscard]] std::span<float> channel(int c) noexcept;
    [[nodiscard]] std::span<const float> channel(int c) const noexcept;

    [[nodiscard]] float& at(int c, int y, int x) noexcept { return data_[index(c, y, x)]; }
    [[nodiscard]] float at(int c, int y, int x) const noexcept { return data_[index(c, y, x)]; }

    [[nodiscard]] std::size_t index(int c, int y, int x) const noexcept {
        return (static_cast<std::size_t>(c) * static_cast<std::size_t>(shape_.height) +
                static_cast<std::size_t>(y)) *
                   static_cast<std::size_t>(shape_.width) +
               static_cast<std::size_t>(x);
    }

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_{};
    std::vector<float> data_;
};

// Per-pixel displacement (u, v) in pixels, stored interleaved row-major.
class FlowField {
public:
    FlowField() = default;
    FlowField(int height, int width, float u = 0.0f, float v = 0.0f);

    [[nodiscard]] int height() const noexcept { return height_; }
    [[nodiscard]] int width() const noexcept { return width_; }
    [[nodiscard]] std::size_t pixels() const noexcept {
        return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
    }

    [[nodiscard]] float& u(int y, int x) noexcept { return data_[2 * offset(y, x)]; }
    [[nodiscard]] float& v(int y, int x) noexcept { return data_[2 * offset(y, x) + 1]; }
    [[nodiscard]] float u(int y, int x) const noexcept { return data_[2 * offset(y, x)]; }
    [[nodiscard]] float v(int y, int x) const noexcept { return data_[2 * offset(y, x) + 1]; }

    [[nodiscard]] std::span<float> data() noexcept { return data_; }
    [[nodiscard]] std::span<const float> data() const noexcept { return data_; }

    // 2 x H x W tensor (u plane, v plane).
    [[nodiscard]] Tensor to_tensor() const;
    static FlowField from_tensor(const Tensor& t);

    friend bool operator==(const FlowField&, const FlowField&) = default;

private:
    [[nodiscard]] std::size_t offset(int y, int x) const noexcept {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    int height_ = 0;
    int width_ = 0;
    std::vector<float> data_;
};

// Cross-correlation convolution parameters. Weights are (out, in, kh, kw).
struct ConvParams {
    int out_channels = 0;
    int in_channels = 0;
    int kernel_h = 1;
    int kernel_w = 1;
    int stride = 1;
    int padding = 0;
    std::vector<float> weights;
    std::vector<float> bias;

    static ConvParams zeros(int out_channels, int in_channels, int kernel, int stride = 1, int padding = 0);

    [[nodiscard]] float weight(int o, int i, int ky, int kx) const noexcept {
        return weights[((static_cast<std::size_t>(o) * in_channels + i) * kernel_h + ky) * kernel_w + kx];
    }
    [[nodiscard]] std::size_t fan_in() const noexcept {
        return static_cast<std::size_t>(in_channels) * kernel_h * kernel_w;
    }
    [[nodiscard]] Shape output_shape(const Shape& input) const;
    // Throws on inconsistent sizes or non-positive stride.
    void validate() const;
};

enum class Activation { Relu, Tanh, Sigmoid };

// OpenMP kernels. Each output element is produced by the same sequence of
// operations as the serial reference in dift/serial.hpp, so results are
// bit-identical regardless of thread count.
Tensor conv2d(const Tensor& input, const ConvParams& params);
Tensor avg_pool2d(const Tensor& input, int window);
Tensor elementwise(const Tensor& input, Activation kind);
Tensor concat_channels(std::span<const Tensor> parts);
Tensor concat_channels(std::initializer_list<const Tensor*> parts);
Tensor slice_channels(const Tensor& input, int begin, int count);

// Per-channel standardization (no affine), epsilon inside the square root.
Tensor instance_norm(const Tensor& input, double eps = 1e-5);
Tensor add(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float factor);

// Zero-pads right and bottom up to (height, width).
Tensor pad_to(const Tensor& input, int height, int width);
Tensor crop(const Tensor& input, int height, int width);

// Bilinear resize with half-pixel centers and edge clamping.
Tensor resize_bilinear(const Tensor& input, int height, int width);

}  // namespace dift
