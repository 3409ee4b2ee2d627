#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mnms/relation.hpp"
#include "mnms/report.hpp"

namespace mnms {

// Calibration of the classical cache-based server. Every formula below is
// closed form; there is no simulation on this side.
struct ClassicalConfig {
    std::uint32_t cache_line_bytes = 64;   // power of two
    std::uint32_t round_trip_factor = 2;   // 2 = block in + block evicted, 1 = read only
    double per_row_visit_ns = 100.0;
    std::uint32_t row_ref_bytes = 8;       // width of an index entry's row reference
    double host_bandwidth_bytes_per_s = 0; // optional alternative time basis; 0 = per-row latency
    EnergyWeights energy_weights;

    void validate() const;
};

enum class SelectMode { full_scan, block_granular, indexed };
enum class JoinStrategy { nested_loop, hash, sort_merge };

// Host<->RAM traffic and response time of a classical SELECT.
//   full_scan:      the whole relation streams through the host.
//   block_granular: one cache-block round trip per row visited.
//   indexed:        visits shrink by the attribute/pointer pairs per block.
TrafficReport classical_select(const RelationSpec& rel, const AttributeSpec& attr,
                               const SelectivitySpec& sel, SelectMode mode,
                               const ClassicalConfig& cfg);

TrafficReport classical_join(const RelationSpec& rel_r, const RelationSpec& rel_s,
                             const AttributeSpec& attr, double output_fraction,
                             JoinStrategy strategy, bool r_indexed, bool s_indexed,
                             const ClassicalConfig& cfg);

// One relation entering an N-way join; output_fraction scales the step
// that joins it in (ignored on the first input).
struct NwayInput {
    RelationSpec rel;
    std::string attr;
    double output_fraction = 1.0;
};

struct NwayStep {
    RelationSpec left;   // prior intermediate (materialized) after step 0
    RelationSpec right;
    std::string attr;
    double output_fraction;
};

// Left-deep plan: each step's intermediate is materialized and becomes the
// next step's left input. plan_error if fewer than two inputs.
std::vector<NwayStep> plan_nway(std::span<const NwayInput> inputs);

// Sums the classical cost of every step; intermediate bytes are counted as
// output writes of step k and input reads of step k+1.
TrafficReport classical_nway(std::span<const NwayStep> steps, JoinStrategy strategy,
                             const ClassicalConfig& cfg);

}  // namespace mnms
