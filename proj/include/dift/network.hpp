#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dift/corrvol.hpp"
#include "dift/io.hpp"
#include "dift/refine.hpp"

namespace dift {

// Bottleneck residual block: 1x1 -> 3x3 (strided) -> 1x1 with a strided 1x1
// projection on the skip path when the block downsamples.
struct BottleneckParams {
    ConvParams conv1;
    ConvParams conv2;
    ConvParams conv3;
    std::optional<ConvParams> projection;
};

struct EncoderParams {
    ConvParams stem;  // 7x7 stride 2
    std::vector<BottleneckParams> blocks;
    std::optional<ConvParams> extra_down;  // present for K = 16
    ConvParams head;                       // 1x1 to the output width
    bool instance_norm = false;
};

struct Model {
    int downsample = 16;
    LookupWindow window;
    UpdateDims update_dims;
    EncoderParams feature_encoder;  // D channels
    EncoderParams context_encoder;  // hidden + context channels
    std::vector<UpdateBank> banks;
};

// Zero-initialized model with every parameter shape fixed by the config.
Model make_model(const RunConfig& config);

// Visits every convolution with its container name ("fnet.layer2.0.conv1").
void for_each_conv(Model& model, const std::function<void(const std::string&, ConvParams&)>& fn);
void for_each_conv(const Model& model, const std::function<void(const std::string&, const ConvParams&)>& fn);

// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] from a SplitMix64 stream keyed
// by (seed, parameter name); weights first, then bias.
void init_conv(ConvParams& conv, std::uint64_t seed, const std::string& name);
void init_model(Model& model, std::uint64_t seed);

ParamStore to_param_store(const Model& model);
// Every conv must be present with matching dims; extra names are rejected.
void load_param_store(Model& model, const ParamStore& store);

// Builds the model for a config: loads config.weights if set, else seeds.
Model build_model(const RunConfig& config);

Tensor run_encoder(const EncoderParams& params, const Tensor& image);

struct EncoderOutputs {
    FeaturePyramid f1;
    FeaturePyramid f2;
    Tensor hidden_init;  // tanh of the first `hidden` context-encoder channels
    Tensor context;      // relu of the remaining channels
};

// Images must share dims divisible by K * 2^(pyramid_depth - 1); grayscale
// inputs are replicated to three channels.
EncoderOutputs encoders(const Tensor& image1, const Tensor& image2, const Model& model, int pyramid_depth);

Tensor to_rgb(const Tensor& image);

struct InferResult {
    FlowField flow;  // original image dims, pixels
    RefinementResult refinement;
    int padded_height = 0;
    int padded_width = 0;
};

InferResult infer(const Model& model, const RunConfig& config, const Tensor& image1, const Tensor& image2);

}  // namespace dift
