#include "mnms/baseline.hpp"

#include <cmath>

#include "mnms/errors.hpp"

namespace mnms {

namespace {

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return b ? (a + b - 1) / b : 0; }

double response_ms_from(const ClassicalConfig& cfg, std::uint64_t row_visits,
                        std::uint64_t host_bytes) {
    if (cfg.host_bandwidth_bytes_per_s > 0)
        return static_cast<double>(host_bytes) / cfg.host_bandwidth_bytes_per_s * 1e3;
    return static_cast<double>(row_visits) * cfg.per_row_visit_ns * 1e-6;
}

}  // namespace

void ClassicalConfig::validate() const {
    if (cache_line_bytes == 0 || (cache_line_bytes & (cache_line_bytes - 1)) != 0)
        throw config_error("classical.cache_line_bytes must be a power of two");
    if (round_trip_factor != 1 && round_trip_factor != 2)
        throw config_error("classical.round_trip_factor must be 1 or 2");
    if (per_row_visit_ns <= 0) throw config_error("classical.per_row_visit_ns must be positive");
    if (row_ref_bytes == 0) throw config_error("classical.row_ref_bytes must be positive");
}

TrafficReport classical_select(const RelationSpec& rel, const AttributeSpec& attr,
                               const SelectivitySpec& sel, SelectMode mode,
                               const ClassicalConfig& cfg) {
    cfg.validate();
    rel.attribute(attr.name);  // schema_error if absent

    const std::uint64_t n = rel.row_count;
    const std::uint64_t cl = cfg.cache_line_bytes;
    const std::uint64_t rt = cfg.round_trip_factor;

    TrafficReport rep;
    std::uint64_t row_visits = 0;
    switch (mode) {
        case SelectMode::full_scan:
            rep.host_ram_bytes = n * rel.row_size_bytes;
            row_visits = n;
            break;
        case SelectMode::block_granular:
            rep.host_ram_bytes = n * ceil_div(attr.size_bytes, cl) * cl * rt;
            row_visits = n;
            break;
        case SelectMode::indexed: {
            const std::uint64_t pairs_per_block = cl / (attr.size_bytes + cfg.row_ref_bytes);
            if (pairs_per_block == 0)
                throw spec_error("index entry (" +
                                 std::to_string(attr.size_bytes + cfg.row_ref_bytes) +
                                 " B) overflows the cache line");
            const std::uint64_t block_visits = ceil_div(n, pairs_per_block);
            rep.host_ram_bytes = block_visits * cl * rt;
            row_visits = block_visits;
            break;
        }
    }
    rep.response_ms = response_ms_from(cfg, row_visits, rep.host_ram_bytes);
    rep.match_count = sel.planted_match_count;
    rep.apply_energy(cfg.energy_weights);
    return rep;
}

TrafficReport classical_join(const RelationSpec& rel_r, const RelationSpec& rel_s,
                             const AttributeSpec& attr, double output_fraction,
                             JoinStrategy strategy, bool r_indexed, bool s_indexed,
                             const ClassicalConfig& cfg) {
    cfg.validate();
    rel_r.attribute(attr.name);
    rel_s.attribute(attr.name);

    const std::uint64_t n_r = rel_r.row_count;
    const std::uint64_t n_s = rel_s.row_count;
    const std::uint64_t bytes_r = rel_r.relation_bytes();
    const std::uint64_t bytes_s = rel_s.relation_bytes();
    const std::uint64_t cl = cfg.cache_line_bytes;
    const std::uint64_t rt = cfg.round_trip_factor;
    const std::uint64_t matches = static_cast<std::uint64_t>(
        std::llround(output_fraction * static_cast<double>(n_r)));
    const std::uint64_t out_bytes =
        matches * (static_cast<std::uint64_t>(rel_r.row_size_bytes) + rel_s.row_size_bytes);

    TrafficReport rep;
    std::uint64_t row_visits = 0;
    switch (strategy) {
        case JoinStrategy::hash: {
            // Build inserts and probes each cost one cache-line round trip;
            // probing an empty table is free.
            std::uint64_t bucket_trips = n_r * cl * rt + (n_r > 0 ? n_s * cl * rt : 0);
            rep.host_ram_bytes = bytes_r + bytes_s + bucket_trips + out_bytes;
            row_visits = n_r + n_s + matches;
            break;
        }
        case JoinStrategy::nested_loop: {
            const std::uint64_t block = ceil_div(attr.size_bytes, cl) * cl * rt;
            rep.host_ram_bytes = n_r * block + n_r * n_s * block;
            row_visits = n_r + n_r * n_s;
            break;
        }
        case JoinStrategy::sort_merge: {
            rep.host_ram_bytes = bytes_r + bytes_s + out_bytes;
            row_visits = n_r + n_s + matches;
            // External sort surcharge: two read+write passes per unsorted side.
            if (!r_indexed) {
                rep.host_ram_bytes += 4 * bytes_r;
                row_visits += 4 * n_r;
            }
            if (!s_indexed) {
                rep.host_ram_bytes += 4 * bytes_s;
                row_visits += 4 * n_s;
            }
            break;
        }
    }
    rep.response_ms = response_ms_from(cfg, row_visits, rep.host_ram_bytes);
    rep.match_count = matches;
    rep.apply_energy(cfg.energy_weights);
    return rep;
}

std::vector<NwayStep> plan_nway(std::span<const NwayInput> inputs) {
    if (inputs.size() < 2)
        throw plan_error("n-way plan needs at least two relations, got " +
                         std::to_string(inputs.size()));

    std::vector<NwayStep> steps;
    RelationSpec left = inputs[0].rel;
    for (std::size_t i = 1; i < inputs.size(); ++i) {
        const NwayInput& in = inputs[i];
        left.attribute(in.attr);
        in.rel.attribute(in.attr);
        steps.push_back({left, in.rel, in.attr, in.output_fraction});

        // Materialized intermediate; its rows concatenate both input rows.
        RelationSpec inter;
        inter.name = left.name + "*" + in.rel.name;
        inter.row_count = static_cast<std::uint64_t>(
            std::llround(in.output_fraction * static_cast<double>(left.row_count)));
        inter.row_size_bytes = left.row_size_bytes + in.rel.row_size_bytes;
        inter.attributes = left.attributes;
        inter.attributes.insert(inter.attributes.end(), in.rel.attributes.begin(),
                                in.rel.attributes.end());
        left = std::move(inter);
    }
    return steps;
}

TrafficReport classical_nway(std::span<const NwayStep> steps, JoinStrategy strategy,
                             const ClassicalConfig& cfg) {
    TrafficReport total;
    for (const NwayStep& step : steps) {
        TrafficReport r = classical_join(step.left, step.right, step.right.attribute(step.attr),
                                         step.output_fraction, strategy, false, false, cfg);
        total.host_ram_bytes += r.host_ram_bytes;
        total.response_ms += r.response_ms;
        total.match_count = r.match_count;  // cardinality of the final intermediate
    }
    total.apply_energy(cfg.energy_weights);
    return total;
}

}  // namespace mnms
