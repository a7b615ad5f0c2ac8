#include "dift/refine.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace dift {

std::vector<int> LookupSchedule::levels() const {
    std::vector<int> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(e.level);
    return out;
}

int LookupSchedule::bank_count() const noexcept {
    int banks = 0;
    for (const auto& e : entries) banks = std::max(banks, e.bank + 1);
    return banks;
}

LookupSchedule make_schedule(int iterations, LookupMode mode, int pyramid_depth, bool coarse_revisit) {
    require(iterations >= 1, "make_schedule: iterations must be >= 1");
    require(pyramid_depth >= 1, "make_schedule: pyramid_depth must be >= 1");
    LookupSchedule s;
    s.pyramid_depth = pyramid_depth;
    if (mode == LookupMode::SingleLevel) {
        for (int k = 0; k < iterations; ++k) s.entries.push_back({k, 0, 0});
        return s;
    }
    const int base = iterations / pyramid_depth;
    const int rem = iterations % pyramid_depth;
    int k = 0;
    for (int level = pyramid_depth - 1; level >= 0; --level) {
        const int phase = base + (level == 0 ? rem : 0);
        for (int i = 0; i < phase; ++i, ++k) s.entries.push_back({k, level, level});
    }
    if (coarse_revisit && pyramid_depth > 1 && iterations > pyramid_depth) {
        auto& last = s.entries.back();
        last.level = pyramid_depth - 1;
        last.bank = pyramid_depth - 1;
    }
    return s;
}

UpdateBank UpdateBank::zeros(const UpdateDims& d) {
    UpdateBank b;
    b.motion.corr1 = ConvParams::zeros(d.corr_feat, d.corr_channels, 1);
    b.motion.flow1 = ConvParams::zeros(d.flow_hidden, 2, 7, 1, 3);
    b.motion.flow2 = ConvParams::zeros(d.flow_feat, d.flow_hidden, 3, 1, 1);
    b.motion.fuse = ConvParams::zeros(d.fused, d.fuse_inputs(), 3, 1, 1);
    const int gin = d.hidden + d.gru_inputs();
    b.gru.gate_z = ConvParams::zeros(d.hidden, gin, 3, 1, 1);
    b.gru.gate_r = ConvParams::zeros(d.hidden, gin, 3, 1, 1);
    b.gru.candidate = ConvParams::zeros(d.hidden, gin, 3, 1, 1);
    b.head.conv1 = ConvParams::zeros(d.head_hidden, d.hidden, 3, 1, 1);
    b.head.conv2 = ConvParams::zeros(2, d.head_hidden, 3, 1, 1);
    return b;
}

void UpdateBank::validate(const UpdateDims& d) const {
    const UpdateBank ref = zeros(d);
    auto check = [](const ConvParams& got, const ConvParams& want, const char* name) {
        got.validate();
        if (got.out_channels != want.out_channels || got.in_channels != want.in_channels ||
            got.kernel_h != want.kernel_h || got.kernel_w != want.kernel_w) {
            fail(std::string("update bank: ") + name + " has shape " + std::to_string(got.out_channels) + "x" +
                 std::to_string(got.in_channels) + "x" + std::to_string(got.kernel_h) + "x" +
                 std::to_string(got.kernel_w) + ", expected " + std::to_string(want.out_channels) + "x" +
                 std::to_string(want.in_channels) + "x" + std::to_string(want.kernel_h) + "x" +
                 std::to_string(want.kernel_w));
        }
    };
    check(motion.corr1, ref.motion.corr1, "motion.corr1");
    check(motion.flow1, ref.motion.flow1, "motion.flow1");
    check(motion.flow2, ref.motion.flow2, "motion.flow2");
    check(motion.fuse, ref.motion.fuse, "motion.fuse");
    check(gru.gate_z, ref.gru.gate_z, "gru.gate_z");
    check(gru.gate_r, ref.gru.gate_r, "gru.gate_r");
    check(gru.candidate, ref.gru.candidate, "gru.candidate");
    check(head.conv1, ref.head.conv1, "head.conv1");
    check(head.conv2, ref.head.conv2, "head.conv2");
}

void LookupHistory::push(Tensor z, Tensor r) {
    slots_[1] = std::move(slots_[0]);
    slots_[0] = Entry{std::move(z), std::move(r)};
    count_ = std::min<std::size_t>(count_ + 1, slots_.size());
}

LookupHistory::Entry LookupHistory::get(std::size_t slot, const Shape& z_shape, const Shape& r_shape) const {
    if (slot < count_) {
        const auto& e = slots_[slot];
        require(e.z.shape() == z_shape && e.r.shape() == r_shape, "lookup history: stored shape mismatch");
        return e;
    }
    return Entry{Tensor(z_shape), Tensor(r_shape)};
}

void LookupHistory::resize(int height, int width) {
    for (std::size_t i = 0; i < count_; ++i) {
        slots_[i].z = resize_bilinear(slots_[i].z, height, width);
        slots_[i].r = resize_bilinear(slots_[i].r, height, width);
    }
}

MotionOutput motion_encoder(const Tensor& corr, const FlowField& flow, const LookupHistory& history,
                            const MotionEncoderParams& params, bool concat_mode) {
    if (corr.channels() != params.corr1.in_channels) {
        fail("motion_encoder: correlation has " + std::to_string(corr.channels()) + " channels, bank expects " +
             std::to_string(params.corr1.in_channels));
    }
    require(flow.height() == corr.height() && flow.width() == corr.width(),
            "motion_encoder: flow and correlation dims differ");
    MotionOutput out;
    out.r = elementwise(conv2d(corr, params.corr1), Activation::Relu);
    const Tensor f = elementwise(conv2d(flow.to_tensor(), params.flow1), Activation::Relu);
    out.z = elementwise(conv2d(f, params.flow2), Activation::Relu);

    std::vector<Tensor> parts{out.r, out.z};
    if (concat_mode) {
        for (std::size_t slot = 0; slot < 2; ++slot) {
            auto e = history.get(slot, out.z.shape(), out.r.shape());
            parts.push_back(std::move(e.z));
            parts.push_back(std::move(e.r));
        }
    }
    const Tensor fuse_in = concat_channels(std::span<const Tensor>(parts));
    if (fuse_in.channels() != params.fuse.in_channels) {
        fail("motion_encoder: fusion input has " + std::to_string(fuse_in.channels()) + " channels, bank expects " +
             std::to_string(params.fuse.in_channels) + (concat_mode ? " (concat on)" : " (concat off)"));
    }
    out.fused = elementwise(conv2d(fuse_in, params.fuse), Activation::Relu);
    return out;
}

Tensor conv_gru_step(const Tensor& hidden, const Tensor& x, const GruParams& params) {
    if (hidden.height() != x.height() || hidden.width() != x.width()) {
        fail("conv_gru_step: hidden " + to_string(hidden.shape()) + " and input " + to_string(x.shape()) +
             " differ spatially");
    }
    const Tensor hx = concat_channels({&hidden, &x});
    const Tensor z = elementwise(conv2d(hx, params.gate_z), Activation::Sigmoid);
    const Tensor r = elementwise(conv2d(hx, params.gate_r), Activation::Sigmoid);
    if (z.shape() != hidden.shape()) {
        fail("conv_gru_step: gate output " + to_string(z.shape()) + " does not match hidden " +
             to_string(hidden.shape()));
    }
    Tensor rh(hidden.shape());
    for (std::size_t i = 0; i < rh.size(); ++i) rh.data()[i] = r.data()[i] * hidden.data()[i];
    const Tensor q = elementwise(conv2d(concat_channels({&rh, &x}), params.candidate), Activation::Tanh);
    Tensor out(hidden.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double zi = z.data()[i];
        out.data()[i] = static_cast<float>((1.0 - zi) * hidden.data()[i] + zi * q.data()[i]);
    }
    return out;
}

Tensor flow_head(const Tensor& hidden, const FlowHeadParams& params) {
    return conv2d(elementwise(conv2d(hidden, params.conv1), Activation::Relu), params.conv2);
}

FlowField upsample_flow(const FlowField& flow, int factor, std::optional<int> crop_height,
                        std::optional<int> crop_width) {
    require(factor >= 1, "upsample_flow: factor must be >= 1");
    Tensor t = factor == 1 ? flow.to_tensor()
                           : scale(resize_bilinear(flow.to_tensor(), flow.height() * factor, flow.width() * factor),
                                   static_cast<float>(factor));
    if (crop_height || crop_width) {
        t = crop(t, crop_height.value_or(t.height()), crop_width.value_or(t.width()));
    }
    return FlowField::from_tensor(t);
}

FlowField downsample_flow(const FlowField& flow, int factor) {
    require(factor >= 1, "downsample_flow: factor must be >= 1");
    if (factor == 1) return flow;
    return FlowField::from_tensor(scale(avg_pool2d(flow.to_tensor(), factor), 1.0f / static_cast<float>(factor)));
}

FlowField add(const FlowField& a, const FlowField& b) {
    require(a.height() == b.height() && a.width() == b.width(), "flow add: dims differ");
    FlowField out = a;
    for (std::size_t i = 0; i < out.data().size(); ++i) out.data()[i] += b.data()[i];
    return out;
}

RefinementResult run_refinement(const RefinementInputs& in, const LookupSchedule& schedule,
                                std::span<const UpdateBank> banks) {
    require(in.f1 && in.f2 && in.hidden_init && in.context, "run_refinement: missing inputs");
    const FeaturePyramid& f1 = *in.f1;
    const FeaturePyramid& f2 = *in.f2;
    require(f1.depth() == f2.depth() && f1.depth() >= 1, "run_refinement: pyramid depths differ");
    for (int p = 0; p < f1.depth(); ++p) {
        require(f1.level(p).shape() == f2.level(p).shape(), "run_refinement: pyramid level shapes differ");
    }
    const int h0 = f1.level(0).height();
    const int w0 = f1.level(0).width();
    require(in.context->height() == h0 && in.context->width() == w0,
            "run_refinement: context dims must equal level-0 dims");
    require(in.hidden_init->height() == h0 && in.hidden_init->width() == w0,
            "run_refinement: hidden dims must equal level-0 dims");
    require(schedule.iterations() >= 1, "run_refinement: empty schedule");
    for (const auto& e : schedule.entries) {
        require(e.level >= 0 && e.level < f1.depth(), "run_refinement: schedule level outside pyramid");
        require(e.bank >= 0 && static_cast<std::size_t>(e.bank) < banks.size(),
                "run_refinement: schedule bank " + std::to_string(e.bank) + " not provided");
    }

    RefinementResult res;
    res.flow = FlowField(h0, w0);
    Tensor hidden = *in.hidden_init;
    LookupHistory history;
    std::map<int, Tensor> context_at;
    int current_level = 0;

    for (const auto& entry : schedule.entries) {
        const int p = entry.level;
        const int factor = 1 << p;
        const Tensor& level1 = f1.level(p);
        const int hp = level1.height();
        const int wp = level1.width();
        if (p != current_level) {
            hidden = resize_bilinear(hidden, hp, wp);
            if (in.reset_history_on_level_change) {
                history.clear();
            } else {
                history.resize(hp, wp);
            }
            current_level = p;
        } else if (hidden.height() != hp || hidden.width() != wp) {
            hidden = resize_bilinear(hidden, hp, wp);
        }
        if (!context_at.contains(p)) context_at.emplace(p, factor == 1 ? *in.context : avg_pool2d(*in.context, factor));
        const Tensor& ctx = context_at.at(p);

        const FlowField flow_p = downsample_flow(res.flow, factor);
        const int slices = std::min<int>(in.n_slice, hp * wp);
        auto lookup = jit_lookup(level1, f2.level(p), flow_p, in.window, slices, in.bytes_per_element);
        res.traces.push_back(lookup.trace);

        const UpdateBank& bank = banks[static_cast<std::size_t>(entry.bank)];
        auto motion = motion_encoder(lookup.features, flow_p, history, bank.motion, in.concat);
        const Tensor flow_t = flow_p.to_tensor();
        const Tensor x = concat_channels({&ctx, &motion.fused, &flow_t});
        hidden = conv_gru_step(hidden, x, bank.gru);

        float hmax = 0.0f;
        for (float v : hidden.data()) hmax = std::max(hmax, std::abs(v));
        res.hidden_abs_max.push_back(hmax);

        const FlowField delta = FlowField::from_tensor(flow_head(hidden, bank.head));
        FlowField contribution = upsample_flow(delta, factor);
        res.flow = add(res.flow, contribution);
        res.snapshots.push_back(res.flow);
        res.contributions.push_back(std::move(contribution));
        history.push(std::move(motion.z), std::move(motion.r));
    }
    return res;
}

}  // namespace dift
