#include "dift/budget.hpp"

#include <iomanip>
#include <ostream>

namespace dift {

namespace {

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

std::int64_t sq(std::int64_t v) { return v * v; }

std::int64_t level_positions(const PipelineConfig& c, std::int64_t level) {
    const std::int64_t h = ceil_div(c.height, c.downsample);
    const std::int64_t w = ceil_div(c.width, c.downsample);
    const std::int64_t f = std::int64_t{1} << level;
    return ceil_div(h, f) * ceil_div(w, f);
}

std::int64_t conv_macs(std::int64_t in, std::int64_t out, std::int64_t k) { return in * out * k * k; }

// Update-block MACs per position, using the channel plan of UpdateDims.
std::int64_t update_macs_per_position(const PipelineConfig& c) {
    UpdateDims d;
    d.corr_channels = static_cast<int>(sq(2 * c.radius + 1) * c.levels_per_iter);
    d.concat = c.concat;
    std::int64_t m = 0;
    m += conv_macs(d.corr_channels, d.corr_feat, 1);
    m += conv_macs(2, d.flow_hidden, 7);
    m += conv_macs(d.flow_hidden, d.flow_feat, 3);
    m += conv_macs(d.fuse_inputs(), d.fused, 3);
    m += 3 * conv_macs(d.hidden + d.gru_inputs(), d.hidden, 3);
    m += conv_macs(d.hidden, d.head_hidden, 3);
    m += conv_macs(d.head_hidden, 2, 3);
    return m;
}

std::int64_t lookup_macs(const PipelineConfig& c, std::int64_t positions) {
    return positions * sq(2 * (c.radius + 1)) * c.feature_dim;
}

std::int64_t lookup_bytes(const PipelineConfig& c, std::int64_t positions) {
    const std::int64_t gathered = positions * sq(2 * (c.radius + 1)) * c.feature_dim;
    const std::int64_t source = positions * c.feature_dim;
    const std::int64_t outputs = positions * sq(2 * c.radius + 1);
    return (gathered + source + outputs) * c.bytes_per_element;
}

}  // namespace

void PipelineConfig::validate() const {
    require(height > 0 && width > 0, "pipeline config: image dims must be positive");
    require(downsample > 0 && feature_dim > 0 && radius > 0 && iterations > 0 && levels_per_iter > 0 &&
                n_slice > 0 && bytes_per_element > 0 && pyramid_depth > 0,
            "pipeline config: all fields must be positive");
    require(downsample == 8 || downsample == 16, "pipeline config: K must be 8 or 16, got " + std::to_string(downsample));
}

MemoryReport peak_memory(const PipelineConfig& c) {
    c.validate();
    MemoryReport r;
    r.positions = level_positions(c, 0);
    require(c.n_slice <= r.positions, "peak_memory: n_slice exceeds the number of positions");
    r.gather_bytes_per_position = sq(2 * (c.radius + 1)) * c.feature_dim * c.bytes_per_element;
    r.untiled_peak = r.positions * r.gather_bytes_per_position * c.levels_per_iter;
    r.tile_positions = ceil_div(r.positions, c.n_slice);
    r.tiled_peak = r.tile_positions * r.gather_bytes_per_position * c.levels_per_iter;
    for (std::int64_t l = 0; l < c.levels_per_iter; ++l) {
        r.full_volume_bytes += r.positions * level_positions(c, l) * c.bytes_per_element;
    }
    return r;
}

CostReport cost_model(const PipelineConfig& c) {
    c.validate();
    CostReport r;
    r.positions = level_positions(c, 0);
    r.lookup_macs_per_level = lookup_macs(c, r.positions);
    r.lookup_bytes_per_level = lookup_bytes(c, r.positions);
    const std::int64_t update_pp = update_macs_per_position(c);
    r.update_macs_per_iter = update_pp * r.positions;

    const auto schedule =
        make_schedule(static_cast<int>(c.iterations), c.mode, static_cast<int>(c.pyramid_depth));
    for (const auto& e : schedule.entries) {
        const std::int64_t pos = level_positions(c, e.level);
        r.lookup_macs_total += c.levels_per_iter * lookup_macs(c, pos);
        r.lookup_bytes_total += c.levels_per_iter * lookup_bytes(c, pos);
        r.update_macs_total += update_pp * pos;
    }
    return r;
}

std::vector<SweepRow> sweep(std::span<const PipelineConfig> configs) {
    require(!configs.empty(), "sweep: need at least one config");
    std::vector<SweepRow> rows;
    rows.reserve(configs.size());
    for (const auto& c : configs) rows.push_back({c, peak_memory(c), cost_model(c)});
    return rows;
}

std::string group_thousands(std::int64_t value) {
    std::string digits = std::to_string(value < 0 ? -value : value);
    std::string out;
    int n = 0;
    for (auto it = digits.rbegin(); it != digits.rend(); ++it, ++n) {
        if (n > 0 && n % 3 == 0) out.push_back(',');
        out.push_back(*it);
    }
    if (value < 0) out.push_back('-');
    return {out.rbegin(), out.rend()};
}

namespace {
const char* mode_name(LookupMode m) { return m == LookupMode::SingleLevel ? "single_level" : "coarse_to_fine"; }
}

void print_memory_report(std::ostream& os, const PipelineConfig& c, const MemoryReport& r) {
    auto line = [&](const char* name, std::int64_t bytes) {
        const double k = static_cast<double>(bytes) / 1024.0;
        os << "  " << std::left << std::setw(22) << name << std::right << std::setw(16) << group_thousands(bytes)
           << " B  " << std::fixed << std::setprecision(2) << std::setw(12) << k << " KiB  " << std::setw(10)
           << k / 1024.0 << " MiB  " << std::setw(9) << k / 1000.0 << " (KiB/1000)\n"
           << std::defaultfloat;
    };
    os << "memory: H=" << c.height << " W=" << c.width << " K=" << c.downsample << " D=" << c.feature_dim
       << " r=" << c.radius << " L=" << c.levels_per_iter << " n_slice=" << c.n_slice
       << " b=" << c.bytes_per_element << '\n';
    os << "  positions P            " << r.positions << " (tile " << r.tile_positions << ")\n";
    line("gather per position", r.gather_bytes_per_position);
    line("untiled peak", r.untiled_peak);
    line("tiled peak", r.tiled_peak);
    line("full 4D volume", r.full_volume_bytes);
}

void print_cost_report(std::ostream& os, const CostReport& r) {
    os << "cost (counts, not time):\n";
    os << "  lookup MACs / level     " << group_thousands(r.lookup_macs_per_level) << '\n';
    os << "  lookup bytes / level    " << group_thousands(r.lookup_bytes_per_level) << '\n';
    os << "  update MACs / iteration " << group_thousands(r.update_macs_per_iter) << '\n';
    os << "  lookup MACs total       " << group_thousands(r.lookup_macs_total) << '\n';
    os << "  lookup bytes total      " << group_thousands(r.lookup_bytes_total) << '\n';
    os << "  update MACs total       " << group_thousands(r.update_macs_total) << '\n';
    os << "  total MACs              " << group_thousands(r.total_macs()) << '\n';
}

void print_sweep_table(std::ostream& os, std::span<const SweepRow> rows) {
    os << std::right << std::setw(6) << "H" << std::setw(6) << "W" << std::setw(4) << "K" << std::setw(5) << "D"
       << std::setw(3) << "r" << std::setw(4) << "N" << std::setw(3) << "L" << std::setw(8) << "n_slice"
       << std::setw(3) << "b" << std::setw(16) << "mode" << std::setw(14) << "untiled B" << std::setw(12)
       << "tiled B" << std::setw(18) << "lookup MACs" << std::setw(18) << "update MACs" << '\n';
    for (const auto& row : rows) {
        const auto& c = row.config;
        os << std::setw(6) << c.height << std::setw(6) << c.width << std::setw(4) << c.downsample << std::setw(5)
           << c.feature_dim << std::setw(3) << c.radius << std::setw(4) << c.iterations << std::setw(3)
           << c.levels_per_iter << std::setw(8) << c.n_slice << std::setw(3) << c.bytes_per_element << std::setw(16)
           << mode_name(c.mode) << std::setw(14) << row.memory.untiled_peak << std::setw(12) << row.memory.tiled_peak
           << std::setw(18) << row.cost.lookup_macs_total << std::setw(18) << row.cost.update_macs_total << '\n';
    }
}

void print_sweep_csv(std::ostream& os, std::span<const SweepRow> rows) {
    os << "H,W,K,D,r,N,L,n_slice,b,mode,positions,untiled_peak,tiled_peak,full_volume,lookup_macs_total,"
          "lookup_bytes_total,update_macs_total\n";
    for (const auto& row : rows) {
        const auto& c = row.config;
        os << c.height << ',' << c.width << ',' << c.downsample << ',' << c.feature_dim << ',' << c.radius << ','
           << c.iterations << ',' << c.levels_per_iter << ',' << c.n_slice << ',' << c.bytes_per_element << ','
           << mode_name(c.mode) << ',' << row.memory.positions << ',' << row.memory.untiled_peak << ','
           << row.memory.tiled_peak << ',' << row.memory.full_volume_bytes << ',' << row.cost.lookup_macs_total << ','
           << row.cost.lookup_bytes_total << ',' << row.cost.update_macs_total << '\n';
    }
}

std::vector<MemoryFixture> published_fixtures() {
    PipelineConfig base;  // 440 x 1024, D = 128, r = 3, b = 1, L = 1
    std::vector<MemoryFixture> out;
    out.push_back({"16x untiled (14.3 MB)", base, 14'680'064, false, false});
    PipelineConfig k8 = base;
    k8.downsample = 8;
    out.push_back({"8x untiled (56.32 MB)", k8, 57'671'680, false, false});
    PipelineConfig tiled = base;
    tiled.n_slice = 56;
    out.push_back({"16x n_slice=56 (262,144 B)", tiled, 262'144, false, true});
    out.push_back({"16x n_slice=56 (<1 MB)", tiled, 1'048'576, true, true});
    return out;
}

bool fixture_passes(const MemoryFixture& f) {
    const auto r = peak_memory(f.config);
    const std::int64_t got = f.tiled ? r.tiled_peak : r.untiled_peak;
    return f.is_bound ? got < f.expected_bytes : got == f.expected_bytes;
}

}  // namespace dift
