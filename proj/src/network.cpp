#include "dift/network.hpp"

#include <cmath>
#include <set>

#include "dift/rng.hpp"

namespace dift {

namespace {

BottleneckParams make_block(int in, int planes, int stride) {
    BottleneckParams b;
    b.conv1 = ConvParams::zeros(planes / 4, in, 1);
    b.conv2 = ConvParams::zeros(planes / 4, planes / 4, 3, stride, 1);
    b.conv3 = ConvParams::zeros(planes, planes / 4, 1);
    if (stride != 1 || in != planes) b.projection = ConvParams::zeros(planes, in, 1, stride, 0);
    return b;
}

EncoderParams make_encoder(int downsample, int out_dim, bool instance_norm) {
    EncoderParams e;
    e.instance_norm = instance_norm;
    e.stem = ConvParams::zeros(32, 3, 7, 2, 3);
    e.blocks.push_back(make_block(32, 32, 1));
    e.blocks.push_back(make_block(32, 32, 1));
    e.blocks.push_back(make_block(32, 64, 2));
    e.blocks.push_back(make_block(64, 64, 1));
    e.blocks.push_back(make_block(64, 96, 2));
    e.blocks.push_back(make_block(96, 96, 1));
    if (downsample == 16) e.extra_down = ConvParams::zeros(96, 96, 3, 2, 1);
    e.head = ConvParams::zeros(out_dim, 96, 1);
    return e;
}

template <typename EncoderT, typename Fn>
void visit_encoder(EncoderT& e, const std::string& prefix, Fn&& fn) {
    fn(prefix + ".stem", e.stem);
    static constexpr const char* kBlockNames[] = {"layer1.0", "layer1.1", "layer2.0",
                                                  "layer2.1", "layer3.0", "layer3.1"};
    for (std::size_t i = 0; i < e.blocks.size(); ++i) {
        const std::string base = prefix + "." + (i < 6 ? kBlockNames[i] : "block" + std::to_string(i));
        auto& b = e.blocks[i];
        fn(base + ".conv1", b.conv1);
        fn(base + ".conv2", b.conv2);
        fn(base + ".conv3", b.conv3);
        if (b.projection) fn(base + ".projection", *b.projection);
    }
    if (e.extra_down) fn(prefix + ".down16", *e.extra_down);
    fn(prefix + ".head", e.head);
}

template <typename ModelT, typename Fn>
void visit_model(ModelT& m, Fn&& fn) {
    visit_encoder(m.feature_encoder, "fnet", fn);
    visit_encoder(m.context_encoder, "cnet", fn);
    for (std::size_t i = 0; i < m.banks.size(); ++i) {
        auto& b = m.banks[i];
        const std::string base = "update.bank" + std::to_string(i);
        fn(base + ".motion.corr1", b.motion.corr1);
        fn(base + ".motion.flow1", b.motion.flow1);
        fn(base + ".motion.flow2", b.motion.flow2);
        fn(base + ".motion.fuse", b.motion.fuse);
        fn(base + ".gru.gate_z", b.gru.gate_z);
        fn(base + ".gru.gate_r", b.gru.gate_r);
        fn(base + ".gru.candidate", b.gru.candidate);
        fn(base + ".head.conv1", b.head.conv1);
        fn(base + ".head.conv2", b.head.conv2);
    }
}

Tensor norm_relu(const Tensor& t, bool norm) { return elementwise(norm ? instance_norm(t) : t, Activation::Relu); }

Tensor run_block(const BottleneckParams& b, const Tensor& x, bool norm) {
    Tensor y = norm_relu(conv2d(x, b.conv1), norm);
    y = norm_relu(conv2d(y, b.conv2), norm);
    y = norm_relu(conv2d(y, b.conv3), norm);
    Tensor skip = x;
    if (b.projection) {
        skip = conv2d(x, *b.projection);
        if (norm) skip = instance_norm(skip);
    }
    return elementwise(add(skip, y), Activation::Relu);
}

}  // namespace

Model make_model(const RunConfig& config) {
    config.validate();
    Model m;
    m.downsample = config.downsample;
    m.window.radius = config.radius;
    m.update_dims.corr_channels = m.window.channels();
    m.update_dims.concat = config.concat;
    m.feature_encoder = make_encoder(config.downsample, config.feature_dim, true);
    m.context_encoder =
        make_encoder(config.downsample, m.update_dims.hidden + m.update_dims.context, false);
    const int banks = config.mode == LookupMode::CoarseToFine ? config.pyramid_depth : 1;
    for (int i = 0; i < banks; ++i) m.banks.push_back(UpdateBank::zeros(m.update_dims));
    return m;
}

void for_each_conv(Model& model, const std::function<void(const std::string&, ConvParams&)>& fn) {
    visit_model(model, fn);
}

void for_each_conv(const Model& model, const std::function<void(const std::string&, const ConvParams&)>& fn) {
    visit_model(model, fn);
}

void init_conv(ConvParams& conv, std::uint64_t seed, const std::string& name) {
    SplitMix64 rng(fnv1a(name) ^ (seed * 0x9E3779B97F4A7C15ull));
    const double s = 1.0 / std::sqrt(static_cast<double>(conv.fan_in()));
    for (auto& w : conv.weights) w = static_cast<float>(rng.uniform(-s, s));
    for (auto& b : conv.bias) b = static_cast<float>(rng.uniform(-s, s));
}

void init_model(Model& model, std::uint64_t seed) {
    for_each_conv(model, [seed](const std::string& name, ConvParams& c) { init_conv(c, seed, name); });
}

ParamStore to_param_store(const Model& model) {
    ParamStore store;
    for_each_conv(model, [&](const std::string& name, const ConvParams& c) {
        store[name + ".weight"] = NamedArray{{static_cast<std::uint32_t>(c.out_channels),
                                              static_cast<std::uint32_t>(c.in_channels),
                                              static_cast<std::uint32_t>(c.kernel_h),
                                              static_cast<std::uint32_t>(c.kernel_w)},
                                             c.weights};
        store[name + ".bias"] = NamedArray{{static_cast<std::uint32_t>(c.out_channels)}, c.bias};
    });
    return store;
}

void load_param_store(Model& model, const ParamStore& store) {
    std::set<std::string> used;
    for_each_conv(model, [&](const std::string& name, ConvParams& c) {
        const auto wi = store.find(name + ".weight");
        const auto bi = store.find(name + ".bias");
        if (wi == store.end() || bi == store.end()) fail("weights: missing tensor for '" + name + "'");
        const std::vector<std::uint32_t> wdims{static_cast<std::uint32_t>(c.out_channels),
                                               static_cast<std::uint32_t>(c.in_channels),
                                               static_cast<std::uint32_t>(c.kernel_h),
                                               static_cast<std::uint32_t>(c.kernel_w)};
        if (wi->second.dims != wdims) fail("weights: shape mismatch for '" + wi->first + "'");
        if (bi->second.dims != std::vector<std::uint32_t>{static_cast<std::uint32_t>(c.out_channels)}) {
            fail("weights: shape mismatch for '" + bi->first + "'");
        }
        c.weights = wi->second.data;
        c.bias = bi->second.data;
        used.insert(wi->first);
        used.insert(bi->first);
    });
    for (const auto& [name, arr] : store) {
        if (!used.contains(name)) fail("weights: unexpected tensor '" + name + "' for this configuration");
    }
}

Model build_model(const RunConfig& config) {
    Model m = make_model(config);
    if (config.weights) {
        load_param_store(m, read_weights(*config.weights));
    } else {
        init_model(m, config.seed);
    }
    return m;
}

Tensor run_encoder(const EncoderParams& p, const Tensor& image) {
    Tensor x = norm_relu(conv2d(image, p.stem), p.instance_norm);
    for (const auto& b : p.blocks) x = run_block(b, x, p.instance_norm);
    if (p.extra_down) x = norm_relu(conv2d(x, *p.extra_down), p.instance_norm);
    return conv2d(x, p.head);
}

Tensor to_rgb(const Tensor& image) {
    if (image.channels() == 3) return image;
    require(image.channels() == 1, "image must have 1 or 3 channels, got " + std::to_string(image.channels()));
    return concat_channels({&image, &image, &image});
}

EncoderOutputs encoders(const Tensor& image1, const Tensor& image2, const Model& model, int pyramid_depth) {
    if (image1.height() != image2.height() || image1.width() != image2.width()) {
        fail("encoders: image dims differ (" + to_string(image1.shape()) + " vs " + to_string(image2.shape()) + ")");
    }
    const int multiple = model.downsample << (pyramid_depth - 1);
    if (image1.height() % multiple != 0 || image1.width() % multiple != 0) {
        fail("encoders: dims must be divisible by " + std::to_string(multiple) + "; pad first");
    }
    // [0, 1] -> [-1, 1]
    auto prep = [](const Tensor& img) {
        Tensor t = to_rgb(img);
        for (auto& v : t.data()) v = 2.0f * v - 1.0f;
        return t;
    };
    const Tensor a = prep(image1);
    const Tensor b = prep(image2);
    EncoderOutputs out;
    out.f1 = build_pyramid(run_encoder(model.feature_encoder, a), pyramid_depth);
    out.f2 = build_pyramid(run_encoder(model.feature_encoder, b), pyramid_depth);
    const Tensor ctx = run_encoder(model.context_encoder, a);
    const int hd = model.update_dims.hidden;
    out.hidden_init = elementwise(slice_channels(ctx, 0, hd), Activation::Tanh);
    out.context = elementwise(slice_channels(ctx, hd, ctx.channels() - hd), Activation::Relu);
    return out;
}

InferResult infer(const Model& model, const RunConfig& config, const Tensor& image1, const Tensor& image2) {
    config.validate();
    if (image1.height() != image2.height() || image1.width() != image2.width()) {
        fail("infer: image dims differ (" + to_string(image1.shape()) + " vs " + to_string(image2.shape()) + ")");
    }
    for (const auto& bank : model.banks) bank.validate(model.update_dims);
    const int multiple = config.pad_multiple();
    const int h = image1.height();
    const int w = image1.width();
    InferResult res;
    res.padded_height = (h + multiple - 1) / multiple * multiple;
    res.padded_width = (w + multiple - 1) / multiple * multiple;
    const Tensor a = pad_to(image1, res.padded_height, res.padded_width);
    const Tensor b = pad_to(image2, res.padded_height, res.padded_width);

    const EncoderOutputs enc = encoders(a, b, model, config.pyramid_depth);
    const LookupSchedule schedule = make_schedule(config.iterations, config.mode, config.pyramid_depth);

    RefinementInputs in;
    in.f1 = &enc.f1;
    in.f2 = &enc.f2;
    in.hidden_init = &enc.hidden_init;
    in.context = &enc.context;
    in.window = model.window;
    in.n_slice = config.n_slice;
    in.bytes_per_element = config.bytes_per_element;
    in.concat = config.concat;
    res.refinement = run_refinement(in, schedule, model.banks);
    res.flow = upsample_flow(res.refinement.flow, model.downsample, h, w);
    return res;
}

}  // namespace dift
