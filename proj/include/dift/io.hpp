#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dift/budget.hpp"
#include "dift/refine.hpp"
#include "dift/tensor.hpp"

namespace dift {

// ---------------------------------------------------------------------------
// Images: binary PGM (P5) and PPM (P6), 8-bit, maxval 255. Values map to
// [0, 1] on read; writing rounds half up and clamps.
// ---------------------------------------------------------------------------
Tensor read_image(const std::filesystem::path& path);
Tensor decode_image(const std::vector<std::uint8_t>& bytes);
void write_image(const std::filesystem::path& path, const Tensor& image);
std::vector<std::uint8_t> encode_image(const Tensor& image);

// ---------------------------------------------------------------------------
// Middlebury .flo: float 202021.25, int32 width, int32 height, then
// width * height interleaved (u, v) float32, all little-endian.
// ---------------------------------------------------------------------------
inline constexpr float kFloMagic = 202021.25f;

FlowField read_flo(const std::filesystem::path& path);
FlowField decode_flo(const std::vector<std::uint8_t>& bytes);
void write_flo(const std::filesystem::path& path, const FlowField& flow);
std::vector<std::uint8_t> encode_flo(const FlowField& flow);

// ---------------------------------------------------------------------------
// Weights container
//
//   magic    8 bytes  "DIFTWTS\0"
//   version  u32      1
//   count    u32
//   count x { u32 name_len, name bytes, u32 rank, rank x u32 dims,
//             prod(dims) x f32 payload }
//
// Integers and floats little-endian. Names are unique; tensors are written in
// name order so identical stores produce identical bytes.
// ---------------------------------------------------------------------------
struct NamedArray {
    std::vector<std::uint32_t> dims;
    std::vector<float> data;
};

using ParamStore = std::map<std::string, NamedArray>;

inline constexpr std::uint32_t kWeightsVersion = 1;

std::vector<std::uint8_t> encode_weights(const ParamStore& store);
ParamStore decode_weights(const std::vector<std::uint8_t>& bytes);
void write_weights(const std::filesystem::path& path, const ParamStore& store);
ParamStore read_weights(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Run configuration: flat "key = value" lines, '#' comments, unknown keys fatal.
// ---------------------------------------------------------------------------
struct RunConfig {
    int downsample = 16;        // K
    int feature_dim = 64;       // D
    int radius = 3;             // r
    int iterations = 6;
    LookupMode mode = LookupMode::CoarseToFine;
    int pyramid_depth = 3;
    int n_slice = 56;
    bool concat = false;
    std::uint64_t seed = 0;
    std::optional<std::filesystem::path> weights;
    int bytes_per_element = 1;

    void validate() const;
    // Pads H, W up to a multiple of downsample * 2^(pyramid_depth - 1).
    [[nodiscard]] int pad_multiple() const noexcept { return downsample << (pyramid_depth - 1); }
    [[nodiscard]] PipelineConfig to_pipeline(int height, int width) const;
};

RunConfig parse_run_config(const std::string& text);
RunConfig read_run_config(const std::filesystem::path& path);
std::string format_run_config(const RunConfig& config);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace dift
