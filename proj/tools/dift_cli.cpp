#include <CLI11.hpp>

#include <algorithm>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "dift/budget.hpp"
#include "dift/error.hpp"
#include "dift/io.hpp"
#include "dift/metrics.hpp"
#include "dift/network.hpp"
#include "dift/sampling.hpp"
#include "dift/selftest.hpp"

namespace {

struct InferArgs {
    std::string cfg, img1, img2, out, vis, save_weights;
    std::optional<std::uint64_t> seed;
};

struct EvalArgs {
    std::string pred, gt;
};

struct MemcheckArgs {
    std::int64_t H = 440, W = 1024, K = 16, D = 128, r = 3, b = 1;
    std::int64_t n_slice = 1, L = 1, N = 12;
    std::string mode = "single_level";
    std::int64_t depth = 1;
    bool csv = false;
};

struct BenchArgs {
    int reps = 200;
    bool csv = false;
};

struct GenArgs {
    std::string img, out_img, out_flo;
    double u = 0.0, v = 0.0;
};

int cmd_infer(const InferArgs& a) {
    dift::RunConfig cfg = a.cfg.empty() ? dift::RunConfig{} : dift::read_run_config(a.cfg);
    if (a.seed) cfg.seed = *a.seed;
    cfg.validate();
    const dift::Tensor img1 = dift::read_image(a.img1);
    const dift::Tensor img2 = dift::read_image(a.img2);
    const dift::Model model = dift::build_model(cfg);
    if (!cfg.weights) {
        std::cerr << "NOTE: running with seeded-random weights (seed " << cfg.seed
                  << "); the flow is a plumbing check, not an estimate\n";
    }
    if (!a.save_weights.empty()) dift::write_weights(a.save_weights, dift::to_param_store(model));
    const dift::InferResult res = dift::infer(model, cfg, img1, img2);
    dift::write_flo(a.out, res.flow);
    if (!a.vis.empty()) dift::write_image(a.vis, dift::colorize_flow(res.flow));

    std::int64_t peak = 0;
    for (const auto& t : res.refinement.traces) peak = std::max<std::int64_t>(peak, t.peak_gather_bytes);
    std::cout << "flow " << res.flow.height() << "x" << res.flow.width() << " (padded " << res.padded_height << "x"
              << res.padded_width << "), " << cfg.iterations << " iterations, peak lookup working set "
              << dift::group_thousands(peak) << " B -> " << a.out << '\n';
    return 0;
}

int cmd_eval(const EvalArgs& a) {
    const dift::FlowField pred = dift::read_flo(a.pred);
    const dift::FlowField gt = dift::read_flo(a.gt);
    std::cout << std::setprecision(6) << "EPE " << dift::epe(pred, gt) << "\nF1-all " << dift::f1_all(pred, gt)
              << " %\n";
    return 0;
}

int cmd_memcheck(const MemcheckArgs& a) {
    dift::PipelineConfig c;
    c.height = a.H;
    c.width = a.W;
    c.downsample = a.K;
    c.feature_dim = a.D;
    c.radius = a.r;
    c.bytes_per_element = a.b;
    c.n_slice = a.n_slice;
    c.levels_per_iter = a.L;
    c.iterations = a.N;
    c.pyramid_depth = a.depth;
    if (a.mode == "single_level") {
        c.mode = dift::LookupMode::SingleLevel;
    } else if (a.mode == "coarse_to_fine") {
        c.mode = dift::LookupMode::CoarseToFine;
    } else {
        dift::fail("memcheck: --mode must be single_level or coarse_to_fine");
    }
    c.validate();
    const std::vector<dift::PipelineConfig> configs{c};
    const auto rows = dift::sweep(configs);
    if (a.csv) {
        dift::print_sweep_csv(std::cout, rows);
    } else {
        dift::print_memory_report(std::cout, c, rows.front().memory);
        dift::print_cost_report(std::cout, rows.front().cost);
    }

    bool all = true;
    std::cout << "\npublished fixtures:\n";
    for (const auto& f : dift::published_fixtures()) {
        const auto r = dift::peak_memory(f.config);
        const std::int64_t got = f.tiled ? r.tiled_peak : r.untiled_peak;
        const bool ok = dift::fixture_passes(f);
        all = all && ok;
        std::cout << "  " << std::left << std::setw(30) << f.label << std::right << std::setw(14)
                  << dift::group_thousands(got) << (f.is_bound ? "  < " : "  == ") << std::setw(12)
                  << dift::group_thousands(f.expected_bytes) << "  " << (ok ? "PASS" : "FAIL") << '\n';
    }
    return all ? 0 : 1;
}

int cmd_bench(const BenchArgs& a) {
    const std::vector<dift::Shape> sizes{{8, 16, 16}, {32, 32, 64}, {128, 28, 64}};
    const auto report = dift::bench_samplers(sizes, a.reps);
    if (a.csv) {
        dift::print_bench_csv(std::cout, report);
    } else {
        dift::print_bench_table(std::cout, report);
    }
    return report.guard_passed ? 0 : 1;
}

int cmd_selftest() {
    const auto results = dift::run_selftest(std::cout);
    const auto failed = std::count_if(results.begin(), results.end(), [](const auto& r) { return !r.passed; });
    std::cout << (failed == 0 ? "all suites passed" : std::to_string(failed) + " suite(s) failed") << '\n';
    return failed == 0 ? 0 : 1;
}

int cmd_gen(const GenArgs& a) {
    const dift::Tensor img1 = dift::read_image(a.img);
    const dift::Tensor img2 = dift::warp_translate(img1, a.u, a.v);
    dift::write_image(a.out_img, img2);
    dift::write_flo(a.out_flo,
                    dift::FlowField(img1.height(), img1.width(), static_cast<float>(a.u), static_cast<float>(a.v)));
    std::cout << "wrote " << a.out_img << " and " << a.out_flo << " (flow " << a.u << ", " << a.v << ")\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dift: memory-bounded correlation-volume optical flow"};
    app.require_subcommand(1);

    InferArgs ia;
    auto* infer = app.add_subcommand("infer", "estimate flow between two PGM/PPM frames");
    infer->add_option("--cfg", ia.cfg, "run config (key = value)");
    infer->add_option("--img1", ia.img1)->required();
    infer->add_option("--img2", ia.img2)->required();
    infer->add_option("--out", ia.out, ".flo output")->required();
    infer->add_option("--vis", ia.vis, "color-wheel PPM output");
    infer->add_option("--seed", ia.seed, "override the config seed");
    infer->add_option("--save-weights", ia.save_weights, "write the model weights container");

    EvalArgs ea;
    auto* eval = app.add_subcommand("eval", "EPE and F1-all of a prediction against ground truth");
    eval->add_option("--pred", ea.pred)->required();
    eval->add_option("--gt", ea.gt)->required();

    MemcheckArgs ma;
    auto* mem = app.add_subcommand("memcheck", "peak-memory and cost report");
    mem->add_option("--H", ma.H);
    mem->add_option("--W", ma.W);
    mem->add_option("--K", ma.K);
    mem->add_option("--D", ma.D);
    mem->add_option("--r", ma.r);
    mem->add_option("--b", ma.b, "bytes per element");
    mem->add_option("--n-slice", ma.n_slice);
    mem->add_option("--L", ma.L, "levels looked up per iteration");
    mem->add_option("--N", ma.N, "iterations");
    mem->add_option("--mode", ma.mode, "single_level | coarse_to_fine");
    mem->add_option("--pyramid-depth", ma.depth);
    mem->add_flag("--csv", ma.csv);

    BenchArgs ba;
    auto* bench = app.add_subcommand("bench", "bilinear shift vs grid sampling");
    bench->add_option("--reps", ba.reps)->check(CLI::PositiveNumber);
    bench->add_flag("--csv", ba.csv);

    auto* self = app.add_subcommand("selftest", "oracle equivalence suites");

    GenArgs ga;
    auto* gen = app.add_subcommand("gen", "synthetic pair with constant flow");
    gen->add_option("--img", ga.img)->required();
    gen->add_option("--u", ga.u);
    gen->add_option("--v", ga.v);
    gen->add_option("--out-img", ga.out_img)->required();
    gen->add_option("--out-flo", ga.out_flo)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (*infer) return cmd_infer(ia);
        if (*eval) return cmd_eval(ea);
        if (*mem) return cmd_memcheck(ma);
        if (*bench) return cmd_bench(ba);
        if (*self) return cmd_selftest();
        if (*gen) return cmd_gen(ga);
    } catch (const dift::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.kind() == dift::ErrorKind::Io ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
