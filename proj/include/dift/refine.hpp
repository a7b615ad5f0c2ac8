#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "dift/corrvol.hpp"
#include "dift/tensor.hpp"

namespace dift {

enum class LookupMode { SingleLevel, CoarseToFine };

struct ScheduleEntry {
    int iteration = 0;
    int level = 0;  // 0 = finest (1/K), p = 1/(K * 2^p)
    int bank = 0;
};

struct LookupSchedule {
    std::vector<ScheduleEntry> entries;
    int pyramid_depth = 1;

    [[nodiscard]] int iterations() const noexcept { return static_cast<int>(entries.size()); }
    [[nodiscard]] std::vector<int> levels() const;
    [[nodiscard]] int bank_count() const noexcept;
};

// single_level: every iteration at level 0 with bank 0.
// coarse_to_fine: pyramid_depth contiguous phases, coarsest first, sized
// iterations / depth each with the remainder added to the finest phase; the
// bank id equals the level. coarse_revisit moves the final iteration back to
// the coarsest level (only when every level still gets an iteration).
LookupSchedule make_schedule(int iterations, LookupMode mode, int pyramid_depth, bool coarse_revisit = false);

// Channel plan of the update block.
struct UpdateDims {
    int hidden = 96;
    int context = 64;
    int corr_channels = 49;  // (2r+1)^2 for one level per iteration
    int corr_feat = 96;      // r_k, from the correlation branch
    int flow_feat = 32;      // z_k, from the flow branch
    int flow_hidden = 64;    // first flow-branch conv
    int fused = 80;
    int head_hidden = 128;
    bool concat = false;

    [[nodiscard]] int fuse_inputs() const noexcept {
        const int base = corr_feat + flow_feat;
        return concat ? base + 2 * (corr_feat + flow_feat) : base;
    }
    [[nodiscard]] int gru_inputs() const noexcept { return context + fused + 2; }
};

struct MotionEncoderParams {
    ConvParams corr1;  // 1x1 over correlation -> r_k
    ConvParams flow1;  // 7x7 over the 2-channel flow
    ConvParams flow2;  // 3x3 -> z_k
    ConvParams fuse;   // 3x3 over [r_k, z_k (, history)]
};

struct GruParams {
    ConvParams gate_z;
    ConvParams gate_r;
    ConvParams candidate;
};

struct FlowHeadParams {
    ConvParams conv1;
    ConvParams conv2;
};

// Parameters of one update block; one per pyramid level in coarse-to-fine mode.
struct UpdateBank {
    MotionEncoderParams motion;
    GruParams gru;
    FlowHeadParams head;

    static UpdateBank zeros(const UpdateDims& dims);
    void validate(const UpdateDims& dims) const;
};

// Last two (z, r) pairs, newest first.
class LookupHistory {
public:
    struct Entry {
        Tensor z;
        Tensor r;
    };

    void push(Tensor z, Tensor r);
    [[nodiscard]] std::size_t size() const noexcept { return count_; }
    // Slot 0 = k-1, slot 1 = k-2. Missing slots are zero tensors of the given shapes.
    [[nodiscard]] Entry get(std::size_t slot, const Shape& z_shape, const Shape& r_shape) const;
    void resize(int height, int width);
    void clear() noexcept { count_ = 0; }

private:
    std::array<Entry, 2> slots_;
    std::size_t count_ = 0;
};

struct MotionOutput {
    Tensor fused;
    Tensor z;  // flow-branch features
    Tensor r;  // correlation-branch features
};

MotionOutput motion_encoder(const Tensor& corr, const FlowField& flow, const LookupHistory& history,
                            const MotionEncoderParams& params, bool concat_mode);

// h' = (1 - z) h + z q with z, r sigmoid gates and q = tanh(W_q [r*h, x]).
Tensor conv_gru_step(const Tensor& hidden, const Tensor& x, const GruParams& params);

Tensor flow_head(const Tensor& hidden, const FlowHeadParams& params);

// Bilinear upsampling by factor with displacements scaled by factor,
// optionally cropped to (crop_height, crop_width).
FlowField upsample_flow(const FlowField& flow, int factor, std::optional<int> crop_height = std::nullopt,
                        std::optional<int> crop_width = std::nullopt);

// Block-mean downsampling with displacements divided by factor.
FlowField downsample_flow(const FlowField& flow, int factor);

FlowField add(const FlowField& a, const FlowField& b);

struct RefinementInputs {
    const FeaturePyramid* f1 = nullptr;
    const FeaturePyramid* f2 = nullptr;
    const Tensor* hidden_init = nullptr;  // hidden x H0 x W0, already tanh'd
    const Tensor* context = nullptr;      // context x H0 x W0
    LookupWindow window;
    int n_slice = 1;
    int bytes_per_element = 1;
    bool concat = false;
    bool reset_history_on_level_change = false;
};

struct RefinementResult {
    FlowField flow;                         // level-0 units and dims
    std::vector<FlowField> snapshots;       // flow after each iteration
    std::vector<FlowField> contributions;   // level-0 increment of each iteration
    std::vector<float> hidden_abs_max;      // max |h| after each GRU step
    std::vector<MemoryTrace> traces;        // one per lookup
};

RefinementResult run_refinement(const RefinementInputs& inputs, const LookupSchedule& schedule,
                                std::span<const UpdateBank> banks);

}  // namespace dift
