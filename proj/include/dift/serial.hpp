#pragma once

// Single-threaded reference versions of the hot kernels. Kept for the
// equivalence tests and the benchmark; the pipeline never calls these.

#include "dift/corrvol.hpp"
#include "dift/tensor.hpp"

namespace dift::serial {

Tensor conv2d(const Tensor& input, const ConvParams& params);
Tensor avg_pool2d(const Tensor& input, int window);
JitResult jit_lookup(const Tensor& f1, const Tensor& f2_level, const FlowField& flow, const LookupWindow& window,
                     int n_slice, int bytes_per_element = 1);

}  // namespace dift::serial
