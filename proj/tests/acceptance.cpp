// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
// Usage: acceptance <path-to-dift-cli> <scratch-dir>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dift/budget.hpp"
#include "dift/corrvol.hpp"
#include "dift/io.hpp"
#include "dift/metrics.hpp"
#include "dift/network.hpp"
#include "dift/refine.hpp"
#include "dift/sampling.hpp"
#include "oracles.hpp"

using namespace dift;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    std::string title;
    double limit_s;  // 0 = no runtime bound
    std::function<Outcome()> run;
};

fs::path g_cli;
fs::path g_scratch;

Outcome peak_fixtures() {
    PipelineConfig c;  // 440 x 1024, K 16, D 128, r 3, b 1
    const auto r16 = peak_memory(c);
    c.downsample = 8;
    const auto r8 = peak_memory(c);
    c.downsample = 16;
    c.n_slice = 56;
    const auto tiled = peak_memory(c);
    std::ostringstream d;
    d << "16x " << group_thousands(r16.untiled_peak) << ", 8x " << group_thousands(r8.untiled_peak)
      << ", n_slice=56 " << group_thousands(tiled.tiled_peak);
    const bool ok = r16.untiled_peak == 14'680'064 && r8.untiled_peak == 57'671'680 &&
                    tiled.tiled_peak == 262'144 && tiled.tiled_peak < 1'048'576;
    return {ok, d.str()};
}

Outcome shift_equivalence() {
    std::mt19937 rng(20240);
    std::uniform_int_distribution<int> dim(2, 16), ch(1, 8);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst = 0.0;
    const int cases = 1000;
    for (int i = 0; i < cases; ++i) {
        const Tensor x = oracle::random_tensor(Shape{ch(rng), dim(rng), dim(rng)}, rng);
        const Shift2D s{unit(rng), unit(rng)};
        std::vector<Coord> coords;
        for (int y = 0; y + 1 < x.height(); ++y)
            for (int xx = 0; xx + 1 < x.width(); ++xx) coords.push_back({xx + s.dx, y + s.dy});
        const Tensor a = bilinear_shift(x, s);
        const Tensor b = grid_sample_bilinear(x, coords, x.height() - 1, x.width() - 1);
        worst = std::max(worst, oracle::max_abs_diff(a.data(), b.data()));
    }
    std::ostringstream d;
    d << cases << " cases, max |diff| " << worst;
    return {worst <= 1e-6, d.str()};
}

Outcome jit_correctness() {
    std::mt19937 rng(20241);
    std::uniform_int_distribution<int> dim(1, 16), ch(1, 32), rad(1, 3);
    double worst = 0.0;
    bool identical = true;
    int oob_cases = 0;
    const int cases = 200;
    for (int i = 0; i < cases; ++i) {
        const int h = dim(rng), w = dim(rng), d = ch(rng);
        const Tensor f1 = oracle::random_tensor(Shape{d, h, w}, rng);
        const Tensor f2 = oracle::random_tensor(Shape{d, h, w}, rng);
        // Every third case pushes targets well outside the map.
        const float reach = i % 3 == 0 ? 3.0f * static_cast<float>(std::max(h, w)) + 8.0f : 4.0f;
        const FlowField flow = oracle::random_flow(h, w, -reach, reach, rng);
        oob_cases += i % 3 == 0;
        const LookupWindow win{rad(rng)};
        const Tensor ref = lookup_precomputed(build_all_pairs(f1, f2), flow, win);
        const int p = h * w;
        const auto base = jit_lookup(f1, f2, flow, win, 1);
        worst = std::max(worst, oracle::max_abs_diff(base.features.data(), ref.data()));
        for (int n : {2, 7, p}) {
            if (n > p) continue;
            const auto r = jit_lookup(f1, f2, flow, win, n);
            worst = std::max(worst, oracle::max_abs_diff(r.features.data(), ref.data()));
            identical = identical && r.features == base.features;
        }
    }
    std::ostringstream d;
    d << cases << " cases (" << oob_cases << " far out of bounds), max |diff| " << worst
      << ", bit-identical across n_slice: " << (identical ? "yes" : "no");
    return {worst <= 1e-5 && identical, d.str()};
}

Outcome engine_model_agreement() {
    std::mt19937 rng(20242);
    struct Case {
        int h, w, d, r, n, b;
    };
    const std::vector<Case> cases{
        {28, 64, 128, 3, 1, 1}, {28, 64, 128, 3, 56, 1}, {28, 64, 64, 3, 56, 1}, {28, 64, 128, 3, 56, 4},
        {28, 64, 32, 2, 7, 1},  {14, 32, 64, 3, 1, 1},   {14, 32, 64, 3, 3, 2},  {7, 16, 64, 3, 5, 1},
        {7, 16, 16, 1, 112, 1}, {16, 16, 32, 3, 2, 1},   {16, 16, 32, 2, 256, 4}, {9, 13, 8, 1, 4, 1},
        {5, 7, 24, 3, 35, 1},   {12, 12, 16, 2, 10, 2},  {3, 30, 12, 1, 11, 1},  {20, 4, 4, 3, 9, 4},
        {1, 1, 8, 1, 1, 1},     {2, 9, 40, 2, 17, 1},    {11, 5, 6, 3, 6, 2},    {28, 64, 128, 3, 1792, 1},
    };
    int agree = 0;
    for (const auto& c : cases) {
        const Tensor f1 = oracle::random_tensor(Shape{c.d, c.h, c.w}, rng);
        const Tensor f2 = oracle::random_tensor(Shape{c.d, c.h, c.w}, rng);
        const FlowField flow = oracle::random_flow(c.h, c.w, -3.0f, 3.0f, rng);
        const auto trace = jit_lookup(f1, f2, flow, LookupWindow{c.r}, c.n, c.b).trace;
        PipelineConfig p;
        p.height = 16 * c.h;
        p.width = 16 * c.w;
        p.downsample = 16;
        p.feature_dim = c.d;
        p.radius = c.r;
        p.n_slice = c.n;
        p.bytes_per_element = c.b;
        agree += static_cast<std::int64_t>(trace.peak_gather_bytes) == peak_memory(p).tiled_peak;
    }
    std::ostringstream d;
    d << agree << "/" << cases.size() << " configs agree exactly";
    return {agree == static_cast<int>(cases.size()) && cases.size() >= 20, d.str()};
}

Outcome cost_proportionality() {
    PipelineConfig c;
    c.height = 448;  // divisible by 16 and 8, so K halving quadruples P exactly
    const auto ref = cost_model(c);
    auto with = [&](auto&& edit) {
        PipelineConfig x = c;
        edit(x);
        return cost_model(x);
    };
    const auto n4 = with([](auto& x) { x.iterations = 4; });
    const auto n8 = with([](auto& x) { x.iterations = 8; });
    const auto l1 = ref;
    const auto l4 = with([](auto& x) { x.levels_per_iter = 4; });
    const auto d64 = with([](auto& x) { x.feature_dim = 64; });
    const auto k8 = with([](auto& x) { x.downsample = 8; });
    const bool n_ok = n8.lookup_macs_total == 2 * n4.lookup_macs_total &&
                      n8.lookup_bytes_total == 2 * n4.lookup_bytes_total;
    const bool l_ok = l4.lookup_macs_total == 4 * l1.lookup_macs_total &&
                      l4.lookup_bytes_total == 4 * l1.lookup_bytes_total;
    const bool d_ok = ref.lookup_macs_total == 2 * d64.lookup_macs_total;
    const bool k_ok = k8.lookup_macs_total == 4 * ref.lookup_macs_total;
    std::ostringstream d;
    d << "N 4->8 x2 " << (n_ok ? "ok" : "no") << ", L 1->4 x4 " << (l_ok ? "ok" : "no") << ", D 64->128 x2 "
      << (d_ok ? "ok" : "no") << ", K 16->8 x4 " << (k_ok ? "ok" : "no") << " (448x1024)";
    return {n_ok && l_ok && d_ok && k_ok, d.str()};
}

Outcome refinement_invariants() {
    RunConfig cfg;
    cfg.feature_dim = 32;
    cfg.iterations = 12;
    cfg.pyramid_depth = 3;
    cfg.n_slice = 7;
    cfg.seed = 11;
    const Model model = build_model(cfg);
    std::mt19937 rng(20243);
    const Tensor a = oracle::random_tensor(Shape{1, 128, 256}, rng, 0.0f, 1.0f);
    const Tensor b = warp_translate(a, 3.0, -2.0);
    const auto enc = encoders(a, b, model, cfg.pyramid_depth);

    RefinementInputs in;
    in.f1 = &enc.f1;
    in.f2 = &enc.f2;
    in.hidden_init = &enc.hidden_init;
    in.context = &enc.context;
    in.window = model.window;
    in.n_slice = cfg.n_slice;
    const auto schedule = make_schedule(12, LookupMode::CoarseToFine, 3);

    auto zero_head = model.banks;
    for (auto& bank : zero_head) bank.head = UpdateBank::zeros(model.update_dims).head;
    const auto zero = run_refinement(in, schedule, zero_head);
    bool zero_ok = zero.snapshots.size() == 12;
    for (const auto& s : zero.snapshots)
        for (float v : s.data()) zero_ok = zero_ok && v == 0.0f;

    const auto res = run_refinement(in, schedule, model.banks);
    double worst = 0.0;
    std::vector<double> sum(res.flow.data().size(), 0.0);
    for (std::size_t k = 0; k < res.contributions.size(); ++k) {
        for (std::size_t i = 0; i < sum.size(); ++i) {
            sum[i] += res.contributions[k].data()[i];
            worst = std::max(worst, std::abs(res.snapshots[k].data()[i] - sum[i]));
        }
    }
    float hmax = 0.0f;
    for (float h : res.hidden_abs_max) hmax = std::max(hmax, h);
    bool hidden_ok = res.hidden_abs_max.size() == 12 && hmax < 1.0f;
    const bool sched_ok = schedule.levels() == std::vector<int>{2, 2, 2, 2, 1, 1, 1, 1, 0, 0, 0, 0};

    std::ostringstream d;
    d << "zero head -> zero flow " << (zero_ok ? "yes" : "no") << ", accumulation max |diff| " << worst
      << ", max |h| " << hmax << ", schedule " << (sched_ok ? "ok" : "wrong");
    return {zero_ok && worst <= 1e-5 && hidden_ok && sched_ok && res.contributions.size() == 12, d.str()};
}

Outcome metric_identities() {
    const FlowField zero(8, 8);
    FlowField off(8, 8, 3.0f, 4.0f);
    const bool five = epe(off, zero) == 5.0;
    const bool f1_eq = f1_all(zero, zero) == 0.0;
    const bool f1_all_out = f1_all(FlowField(8, 8, 11.0f, 0.0f), FlowField(8, 8, 1.0f, 0.0f)) == 100.0;

    std::mt19937 rng(20244);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const FlowField p = oracle::random_flow(5, 7, -10.0f, 10.0f, rng);
        const FlowField g = oracle::random_flow(5, 7, -10.0f, 10.0f, rng);
        double s = 0.0;
        for (int y = 0; y < 5; ++y)
            for (int x = 0; x < 7; ++x) {
                const double du = double{p.u(y, x)} - g.u(y, x), dv = double{p.v(y, x)} - g.v(y, x);
                s += std::sqrt(du * du + dv * dv);
            }
        worst = std::max(worst, std::abs(epe(p, g) - s / 35.0));
    }
    std::ostringstream d;
    d << "epe(3,4)=5 " << (five ? "yes" : "no") << ", f1 0% " << (f1_eq ? "yes" : "no") << ", f1 100% "
      << (f1_all_out ? "yes" : "no") << ", loop oracle max |diff| " << worst;
    return {five && f1_eq && f1_all_out && worst <= 1e-6, d.str()};
}

int run_cli(const std::string& args) {
    const std::string cmd = "\"" + g_cli.string() + "\" " + args + " > \"" + (g_scratch / "cli.log").string() + "\" 2>&1";
    return std::system(cmd.c_str());
}

Outcome end_to_end() {
    fs::create_directories(g_scratch);
    std::mt19937 rng(20245);
    // Smooth random texture.
    const Tensor img = resize_bilinear(oracle::random_tensor(Shape{1, 56, 128}, rng, 0.0f, 1.0f), 448, 1024);
    const fs::path a = g_scratch / "a.pgm", b = g_scratch / "b.pgm", gt = g_scratch / "gt.flo";
    const fs::path o1 = g_scratch / "run1.flo", o2 = g_scratch / "run2.flo";
    write_image(a, img);

    std::ostringstream d;
    if (run_cli("gen --img \"" + a.string() + "\" --u 4 --v -2 --out-img \"" + b.string() + "\" --out-flo \"" +
                gt.string() + "\"") != 0) {
        return {false, "gen failed"};
    }
    const std::string common = "infer --img1 \"" + a.string() + "\" --img2 \"" + b.string() + "\" --seed 7 --out ";
    if (run_cli(common + "\"" + o1.string() + "\"") != 0 || run_cli(common + "\"" + o2.string() + "\"") != 0) {
        return {false, "infer failed"};
    }
    const bool identical = read_file(o1) == read_file(o2);
    const FlowField f = read_flo(o1);
    const bool dims = f.height() == 448 && f.width() == 1024 && read_file(o1).size() == 12 + 448u * 1024 * 8;
    const FlowField g = read_flo(gt);
    bool gt_const = true;
    for (int y = 0; y < g.height(); ++y)
        for (int x = 0; x < g.width(); ++x) gt_const = gt_const && g.u(y, x) == 4.0f && g.v(y, x) == -2.0f;
    const double self = epe(g, g);
    const bool eval_ok = run_cli("eval --pred \"" + gt.string() + "\" --gt \"" + gt.string() + "\"") == 0;
    std::string log;
    {
        const auto bytes = read_file(g_scratch / "cli.log");
        log.assign(bytes.begin(), bytes.end());
    }
    const bool eval_zero = log.find("EPE 0\n") != std::string::npos;
    d << "two seeded runs bit-identical " << (identical ? "yes" : "no") << ", dims " << f.height() << "x" << f.width()
      << "x2, gt constant " << (gt_const ? "yes" : "no") << ", EPE(gt, gt) " << self << " (cli: "
      << (eval_zero ? "0" : "?") << ")";
    return {identical && dims && gt_const && self == 0.0 && eval_ok && eval_zero, d.str()};
}

Outcome sampler_bench() {
    const std::vector<Shape> sizes{{8, 16, 16}, {64, 28, 64}};
    const auto report = bench_samplers(sizes, 20);
    std::ostringstream table, csv;
    print_bench_table(table, report);
    print_bench_csv(csv, report);
    bool formed = report.rows.size() == sizes.size();
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
        formed = formed && report.rows[i].shape == sizes[i] && report.rows[i].shift_ns > 0.0 &&
                 report.rows[i].grid_ns > 0.0;
    }
    const std::string t = table.str();
    formed = formed && t.find("equivalence guard: PASS") != std::string::npos;
    std::ostringstream d;
    d << "guard " << (report.guard_passed ? "passed" : "FAILED") << ", desk ratios";
    for (const auto& r : report.rows) d << ' ' << r.speedup() << 'x';
    d << " (8x reference not asserted)";
    return {report.guard_passed && formed, d.str()};
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 3) {
        std::cerr << "usage: acceptance <dift-cli> <scratch-dir>\n";
        return 2;
    }
    g_cli = argv[1];
    g_scratch = argv[2];

    const std::vector<Criterion> criteria{
        {1, "peak-memory fixtures", 1.0, peak_fixtures},
        {2, "bilinear-shift equivalence", 10.0, shift_equivalence},
        {3, "JiT lookup correctness", 60.0, jit_correctness},
        {4, "engine/model peak agreement", 0.0, engine_model_agreement},
        {5, "cost-model proportionality", 0.0, cost_proportionality},
        {6, "refinement invariants", 0.0, refinement_invariants},
        {7, "metric identities", 0.0, metric_identities},
        {8, "end-to-end determinism and shape", 120.0, end_to_end},
        {9, "sampler benchmark", 0.0, sampler_bench},
    };

    int failed = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = c.limit_s <= 0.0 || s < c.limit_s;
        const bool pass = o.pass && in_time;
        failed += !pass;
        std::cout << (pass ? "PASS" : "FAIL") << "  criterion " << c.id << ": " << c.title << " - " << o.detail
                  << " [" << std::fixed;
        std::cout.precision(2);
        std::cout << s << " s";
        if (c.limit_s > 0.0) std::cout << " / limit " << c.limit_s << " s";
        std::cout << "]\n" << std::defaultfloat;
        std::cout.precision(6);
    }
    std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << '\n';
    return failed == 0 ? 0 : 1;
}
