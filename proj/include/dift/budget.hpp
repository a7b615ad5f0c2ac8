#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dift/refine.hpp"

namespace dift {

// Analytic accounting of the correlation working set and a MAC/byte count
// model of one inference. Everything here is exact integer arithmetic.
struct PipelineConfig {
    std::int64_t height = 440;
    std::int64_t width = 1024;
    std::int64_t downsample = 16;       // K
    std::int64_t feature_dim = 128;     // D
    std::int64_t radius = 3;            // r
    std::int64_t iterations = 12;       // N
    std::int64_t levels_per_iter = 1;   // L, cost-volume levels looked up per iteration
    std::int64_t n_slice = 1;
    std::int64_t bytes_per_element = 1;
    LookupMode mode = LookupMode::SingleLevel;
    std::int64_t pyramid_depth = 1;     // only used by coarse_to_fine
    bool concat = false;

    void validate() const;
};

struct MemoryReport {
    std::int64_t positions = 0;          // P = ceil(H/K) * ceil(W/K)
    std::int64_t gather_bytes_per_position = 0;  // (2(r+1))^2 * D * b
    std::int64_t untiled_peak = 0;       // P * g * L
    std::int64_t tile_positions = 0;     // ceil(P / n_slice)
    std::int64_t tiled_peak = 0;         // ceil(P / n_slice) * g * L
    std::int64_t full_volume_bytes = 0;  // sum over L pooled levels of P * P_l * b
};

struct CostReport {
    std::int64_t positions = 0;
    std::int64_t lookup_macs_per_level = 0;   // P * (2(r+1))^2 * D at level 0
    std::int64_t lookup_bytes_per_level = 0;  // gathered features + f1 reads + outputs
    std::int64_t update_macs_per_iter = 0;    // motion encoder + GRU + flow head at level 0
    std::int64_t lookup_macs_total = 0;
    std::int64_t lookup_bytes_total = 0;
    std::int64_t update_macs_total = 0;
    [[nodiscard]] std::int64_t total_macs() const noexcept { return lookup_macs_total + update_macs_total; }
};

MemoryReport peak_memory(const PipelineConfig& config);
CostReport cost_model(const PipelineConfig& config);

struct SweepRow {
    PipelineConfig config;
    MemoryReport memory;
    CostReport cost;
};

std::vector<SweepRow> sweep(std::span<const PipelineConfig> configs);

void print_sweep_table(std::ostream& os, std::span<const SweepRow> rows);
void print_sweep_csv(std::ostream& os, std::span<const SweepRow> rows);
void print_memory_report(std::ostream& os, const PipelineConfig& config, const MemoryReport& report);
void print_cost_report(std::ostream& os, const CostReport& report);

// "14,680,064"
std::string group_thousands(std::int64_t value);

// Peak-memory fixtures from the published comparison table.
struct MemoryFixture {
    std::string label;
    PipelineConfig config;
    std::int64_t expected_bytes = 0;  // exact, or an upper bound when is_bound
    bool is_bound = false;
    bool tiled = false;
};

std::vector<MemoryFixture> published_fixtures();
bool fixture_passes(const MemoryFixture& fixture);

}  // namespace dift
