#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include "dift/tensor.hpp"

namespace dift {

// Optional per-pixel validity, row-major, nonzero = valid.
using ValidMask = std::span<const std::uint8_t>;

// Mean endpoint error over valid pixels.
double epe(const FlowField& pred, const FlowField& gt, std::optional<ValidMask> valid = std::nullopt);

// Percentage of valid pixels with endpoint error > 3 px and > 5% of |gt|
// (both strict).
double f1_all(const FlowField& pred, const FlowField& gt, std::optional<ValidMask> valid = std::nullopt);

// Middlebury color-wheel visualization as a 3-channel [0, 1] image. Magnitudes
// are normalized by max_magnitude, or by the largest observed when absent.
Tensor colorize_flow(const FlowField& flow, std::optional<double> max_magnitude = std::nullopt);

// Second frame of a synthetic pair: image1 translated by (u, v) with bilinear
// sampling and zero fill, i.e. I2(x, y) = I1(x - u, y - v).
Tensor warp_translate(const Tensor& image1, double u, double v);

}  // namespace dift
