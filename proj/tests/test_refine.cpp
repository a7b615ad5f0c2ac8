#include <doctest.h>

#include <cmath>
#include <random>

#include "dift/network.hpp"
#include "dift/refine.hpp"
#include "oracles.hpp"

using namespace dift;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

UpdateDims small_dims(bool concat = false) {
    UpdateDims d;
    d.hidden = 4;
    d.context = 3;
    d.corr_channels = 9;
    d.corr_feat = 5;
    d.flow_feat = 3;
    d.flow_hidden = 4;
    d.fused = 6;
    d.head_hidden = 5;
    d.concat = concat;
    return d;
}

void randomize(UpdateBank& b, std::uint64_t seed) {
    init_conv(b.motion.corr1, seed, "corr1");
    init_conv(b.motion.flow1, seed, "flow1");
    init_conv(b.motion.flow2, seed, "flow2");
    init_conv(b.motion.fuse, seed, "fuse");
    init_conv(b.gru.gate_z, seed, "z");
    init_conv(b.gru.gate_r, seed, "r");
    init_conv(b.gru.candidate, seed, "q");
    init_conv(b.head.conv1, seed, "h1");
    init_conv(b.head.conv2, seed, "h2");
}

struct Fixture {
    FeaturePyramid f1, f2;
    Tensor hidden, context;
};

Fixture make_fixture(const UpdateDims& d, int h, int w, int depth, unsigned seed) {
    std::mt19937 rng(seed);
    Fixture fx;
    fx.f1 = build_pyramid(oracle::random_tensor(Shape{6, h, w}, rng), depth);
    fx.f2 = build_pyramid(oracle::random_tensor(Shape{6, h, w}, rng), depth);
    fx.hidden = elementwise(oracle::random_tensor(Shape{d.hidden, h, w}, rng, -2.0f, 2.0f), Activation::Tanh);
    fx.context = elementwise(oracle::random_tensor(Shape{d.context, h, w}, rng), Activation::Relu);
    return fx;
}

RefinementInputs inputs_for(const Fixture& fx, bool concat) {
    RefinementInputs in;
    in.f1 = &fx.f1;
    in.f2 = &fx.f2;
    in.hidden_init = &fx.hidden;
    in.context = &fx.context;
    in.window = LookupWindow{1};
    in.n_slice = 3;
    in.concat = concat;
    return in;
}

}  // namespace

TEST_CASE("schedules") {
    const auto single = make_schedule(12, LookupMode::SingleLevel, 1);
    CHECK(single.iterations() == 12);
    for (const auto& e : single.entries) {
        CHECK(e.level == 0);
        CHECK(e.bank == 0);
    }
    CHECK(make_schedule(12, LookupMode::CoarseToFine, 3).levels() ==
          std::vector<int>{2, 2, 2, 2, 1, 1, 1, 1, 0, 0, 0, 0});
    CHECK(make_schedule(4, LookupMode::CoarseToFine, 3).levels() == std::vector<int>{2, 1, 0, 0});
    CHECK(make_schedule(6, LookupMode::CoarseToFine, 3).levels() == std::vector<int>{2, 2, 1, 1, 0, 0});
    CHECK(make_schedule(7, LookupMode::CoarseToFine, 3, true).levels() == std::vector<int>{2, 2, 1, 1, 0, 0, 2});
    CHECK(make_schedule(2, LookupMode::CoarseToFine, 3).levels() == std::vector<int>{0, 0});
    CHECK_THROWS_AS(make_schedule(0, LookupMode::SingleLevel, 1), Error);

    for (int n = 3; n <= 20; ++n) {
        const auto s = make_schedule(n, LookupMode::CoarseToFine, 3);
        CHECK(s.iterations() == n);
        CHECK(s.bank_count() == 3);
        int count[3] = {0, 0, 0};
        for (std::size_t i = 0; i < s.entries.size(); ++i) {
            CHECK(s.entries[i].bank == s.entries[i].level);
            if (i > 0) CHECK(s.entries[i].level <= s.entries[i - 1].level);
            ++count[s.entries[i].level];
        }
        CHECK(count[2] == n / 3);
        CHECK(count[1] == n / 3);
        CHECK(count[0] == n / 3 + n % 3);
    }
}

TEST_CASE("update dims") {
    UpdateDims d;
    CHECK(d.fuse_inputs() == 128);
    CHECK(d.gru_inputs() == 146);
    d.concat = true;
    CHECK(d.fuse_inputs() == 128 + 2 * (96 + 32));
}

TEST_CASE("history ring keeps the newest two") {
    LookupHistory h;
    const Shape zs{2, 3, 3}, rs{4, 3, 3};
    CHECK(h.get(0, zs, rs).z == Tensor(zs));
    h.push(Tensor(zs, 1.0f), Tensor(rs, 1.0f));
    h.push(Tensor(zs, 2.0f), Tensor(rs, 2.0f));
    h.push(Tensor(zs, 3.0f), Tensor(rs, 3.0f));
    CHECK(h.size() == 2);
    CHECK(h.get(0, zs, rs).z.data()[0] == 3.0f);
    CHECK(h.get(1, zs, rs).r.data()[0] == 2.0f);
    h.resize(6, 5);
    CHECK(h.get(0, Shape{2, 6, 5}, Shape{4, 6, 5}).z == Tensor(Shape{2, 6, 5}, 3.0f));
    h.clear();
    CHECK(h.size() == 0);
}

TEST_CASE("motion encoder") {
    std::mt19937 rng(1);
    const auto d = small_dims(true);
    const Tensor corr = oracle::random_tensor(Shape{9, 4, 5}, rng);
    const FlowField flow = oracle::random_flow(4, 5, -2.0f, 2.0f, rng);

    SUBCASE("zero bank gives zero features") {
        const auto out = motion_encoder(corr, flow, LookupHistory{}, UpdateBank::zeros(d).motion, true);
        for (float v : out.fused.data()) CHECK(v == 0.0f);
    }
    SUBCASE("empty history equals explicit zero history") {
        UpdateBank b = UpdateBank::zeros(d);
        randomize(b, 3);
        LookupHistory zeros;
        zeros.push(Tensor(Shape{d.flow_feat, 4, 5}), Tensor(Shape{d.corr_feat, 4, 5}));
        zeros.push(Tensor(Shape{d.flow_feat, 4, 5}), Tensor(Shape{d.corr_feat, 4, 5}));
        CHECK(motion_encoder(corr, flow, LookupHistory{}, b.motion, true).fused ==
              motion_encoder(corr, flow, zeros, b.motion, true).fused);
    }
    SUBCASE("fusion width follows the channel plan") {
        UpdateBank b = UpdateBank::zeros(d);
        CHECK(b.motion.fuse.in_channels == d.corr_feat + d.flow_feat + 2 * (d.flow_feat + d.corr_feat));
        CHECK_THROWS_AS(motion_encoder(corr, flow, LookupHistory{}, b.motion, false), Error);
    }
    SUBCASE("concat degenerates to plain mode when extra weights are zero") {
        auto plain_dims = small_dims(false);
        UpdateBank plain = UpdateBank::zeros(plain_dims);
        randomize(plain, 5);
        UpdateBank wide = UpdateBank::zeros(d);
        wide.motion.corr1 = plain.motion.corr1;
        wide.motion.flow1 = plain.motion.flow1;
        wide.motion.flow2 = plain.motion.flow2;
        wide.motion.fuse.bias = plain.motion.fuse.bias;
        const int base = plain_dims.fuse_inputs();
        for (int o = 0; o < d.fused; ++o)
            for (int i = 0; i < base; ++i)
                for (int k = 0; k < 9; ++k) {
                    wide.motion.fuse.weights[(o * d.fuse_inputs() + i) * 9 + k] =
                        plain.motion.fuse.weights[(o * base + i) * 9 + k];
                }
        LookupHistory hist;
        hist.push(oracle::random_tensor(Shape{d.flow_feat, 4, 5}, rng), oracle::random_tensor(Shape{d.corr_feat, 4, 5}, rng));
        CHECK(motion_encoder(corr, flow, hist, wide.motion, true).fused ==
              motion_encoder(corr, flow, LookupHistory{}, plain.motion, false).fused);
    }
}

TEST_CASE("conv GRU step") {
    std::mt19937 rng(2);
    GruParams zero{ConvParams::zeros(4, 7, 3, 1, 1), ConvParams::zeros(4, 7, 3, 1, 1), ConvParams::zeros(4, 7, 3, 1, 1)};
    const Tensor h = oracle::random_tensor(Shape{4, 3, 3}, rng);
    const Tensor x = oracle::random_tensor(Shape{3, 3, 3}, rng);
    const Tensor half = conv_gru_step(h, x, zero);
    for (std::size_t i = 0; i < h.size(); ++i) CHECK(half.data()[i] == static_cast<float>(0.5 * h.data()[i]));
    const Tensor still = conv_gru_step(Tensor(h.shape()), x, zero);
    for (float v : still.data()) CHECK(v == 0.0f);

    GruParams g{oracle::random_conv(4, 7, 3, 1, 1, rng), oracle::random_conv(4, 7, 3, 1, 1, rng),
                oracle::random_conv(4, 7, 3, 1, 1, rng)};
    const Tensor out = conv_gru_step(h, x, g);
    const Tensor hx = concat_channels({&h, &x});
    const auto zp = oracle::conv2d(hx, g.gate_z);
    const auto rp = oracle::conv2d(hx, g.gate_r);
    Tensor rhx = hx;
    for (std::size_t i = 0; i < h.size(); ++i) rhx.data()[i] = static_cast<float>(sigmoid(rp[i]) * h.data()[i]);
    const auto qp = oracle::conv2d(rhx, g.candidate);
    for (std::size_t i = 0; i < h.size(); ++i) {
        const double z = sigmoid(zp[i]);
        const double want = (1.0 - z) * h.data()[i] + z * std::tanh(qp[i]);
        CHECK(std::abs(out.data()[i] - want) <= 1e-6);
    }
}

TEST_CASE("flow resampling") {
    std::mt19937 rng(3);
    const FlowField c(3, 4, 0.25f, -1.5f);
    const FlowField up = upsample_flow(c, 16);
    CHECK(up.height() == 48);
    CHECK(up.width() == 64);
    for (int y = 0; y < 48; ++y)
        for (int x = 0; x < 64; ++x) {
            CHECK(up.u(y, x) == 4.0f);
            CHECK(up.v(y, x) == -24.0f);
        }
    const FlowField f = oracle::random_flow(5, 6, -3.0f, 3.0f, rng);
    CHECK(upsample_flow(f, 1) == f);
    const FlowField u2 = upsample_flow(f, 2);
    const Tensor ft = f.to_tensor();
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 12; ++x) {
            CHECK(std::abs(u2.u(y, x) - 2.0 * oracle::resize_at(ft, 0, y, x, 10, 12)) <= 1e-5);
            CHECK(std::abs(u2.v(y, x) - 2.0 * oracle::resize_at(ft, 1, y, x, 10, 12)) <= 1e-5);
        }
    const FlowField cropped = upsample_flow(f, 4, 17, 23);
    CHECK(cropped.height() == 17);
    CHECK(cropped.width() == 23);
    CHECK(downsample_flow(upsample_flow(c, 4), 4) == c);
}

TEST_CASE("refinement invariants") {
    const auto d = small_dims();
    const Fixture fx = make_fixture(d, 8, 8, 3, 4);
    const RefinementInputs in = inputs_for(fx, false);

    std::vector<UpdateBank> banks(3, UpdateBank::zeros(d));
    for (std::size_t i = 0; i < banks.size(); ++i) randomize(banks[i], 10 + i);

    SUBCASE("zero flow head keeps the flow at zero") {
        auto zeroed = banks;
        for (auto& b : zeroed) b.head = UpdateBank::zeros(d).head;
        const auto res = run_refinement(in, make_schedule(12, LookupMode::CoarseToFine, 3), zeroed);
        for (const auto& s : res.snapshots)
            for (float v : s.data()) CHECK(v == 0.0f);
    }
    SUBCASE("accumulation, range, determinism") {
        for (LookupMode mode : {LookupMode::SingleLevel, LookupMode::CoarseToFine}) {
            const auto sched = make_schedule(12, mode, mode == LookupMode::SingleLevel ? 1 : 3);
            const auto res = run_refinement(in, sched, banks);
            REQUIRE(res.snapshots.size() == 12);
            REQUIRE(res.traces.size() == 12);
            std::vector<double> sum(res.flow.data().size(), 0.0);
            for (std::size_t k = 0; k < 12; ++k) {
                for (std::size_t i = 0; i < sum.size(); ++i) {
                    sum[i] += res.contributions[k].data()[i];
                    CHECK(std::abs(res.snapshots[k].data()[i] - sum[i]) <= 1e-5);
                }
                CHECK(res.hidden_abs_max[k] < 1.0f);
            }
            CHECK(res.snapshots.back() == res.flow);
            const auto again = run_refinement(in, sched, banks);
            CHECK(again.snapshots == res.snapshots);
        }
    }
    SUBCASE("lookups run at the scheduled level") {
        const auto res = run_refinement(in, make_schedule(6, LookupMode::CoarseToFine, 3), banks);
        // 2x2, 4x4 and 8x8 positions split into three tiles.
        const std::size_t expect[] = {2, 2, 6, 6, 22, 22};
        for (std::size_t k = 0; k < 6; ++k) CHECK(res.traces[k].max_tile_pixels == expect[k]);
    }
    SUBCASE("banks follow levels") {
        auto other = banks;
        randomize(other[2], 99);
        CHECK(run_refinement(in, make_schedule(6, LookupMode::SingleLevel, 1), banks).flow ==
              run_refinement(in, make_schedule(6, LookupMode::SingleLevel, 1), other).flow);
        const auto a = run_refinement(in, make_schedule(6, LookupMode::CoarseToFine, 3), banks);
        const auto b = run_refinement(in, make_schedule(6, LookupMode::CoarseToFine, 3), other);
        CHECK(a.snapshots[0] != b.snapshots[0]);
    }
    SUBCASE("concat mode with history reset") {
        const auto cd = small_dims(true);
        std::vector<UpdateBank> cb(3, UpdateBank::zeros(cd));
        for (std::size_t i = 0; i < cb.size(); ++i) randomize(cb[i], 20 + i);
        RefinementInputs cin = inputs_for(fx, true);
        const auto kept = run_refinement(cin, make_schedule(6, LookupMode::CoarseToFine, 3), cb);
        cin.reset_history_on_level_change = true;
        const auto reset = run_refinement(cin, make_schedule(6, LookupMode::CoarseToFine, 3), cb);
        CHECK(kept.snapshots[0] == reset.snapshots[0]);
        CHECK(kept.snapshots[1] == reset.snapshots[1]);
        CHECK(kept.flow != reset.flow);
    }
    SUBCASE("bad inputs") {
        CHECK_THROWS_AS(run_refinement(in, make_schedule(3, LookupMode::CoarseToFine, 3),
                                       std::span<const UpdateBank>(banks).first(1)),
                        Error);
        const Fixture shallow = make_fixture(d, 8, 8, 1, 5);
        CHECK_THROWS_AS(run_refinement(inputs_for(shallow, false), make_schedule(3, LookupMode::CoarseToFine, 3), banks),
                        Error);
    }
}
