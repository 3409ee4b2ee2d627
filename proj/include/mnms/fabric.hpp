#pragma once

#include <cstdint>

#include "mnms/report.hpp"

namespace mnms {

// Fixed-fanout generalized fat tree over the memory nodes. Leaves are the
// nodes; switches are implicit. Distance between leaves is twice the level
// of their lowest common ancestor.
class FabricTopology {
  public:
    FabricTopology(std::uint32_t fanout, std::uint32_t levels, std::uint32_t leaf_count);

    std::uint32_t fanout() const { return fanout_; }
    std::uint32_t levels() const { return levels_; }
    std::uint32_t leaf_count() const { return leaf_count_; }

    std::uint32_t hops(std::uint32_t a, std::uint32_t b) const;

    // Sum / max of hops(src, o) over o in [lo, hi); closed form, O(levels).
    // Both are building blocks for bulk message accounting.
    std::uint64_t hops_sum(std::uint32_t src, std::uint32_t lo, std::uint32_t hi) const;
    std::uint32_t hops_max(std::uint32_t src, std::uint32_t lo, std::uint32_t hi) const;

  private:
    // [start, end) of the level-l subtree containing src, clamped to leaves.
    void subtree(std::uint32_t src, std::uint32_t level, std::uint32_t& start,
                 std::uint32_t& end) const;

    std::uint32_t fanout_;
    std::uint32_t levels_;
    std::uint32_t leaf_count_;
};

FabricTopology build_ffgt(std::uint32_t fanout, std::uint32_t levels, std::uint32_t leaf_count);

// Calibration of the MNMS machine: nodes, fabric shape, threadlet
// concurrency, and the per-row / per-hop rate constants the response-time
// model is built from.
struct MnmsConfig {
    std::uint32_t node_count = 8000;
    std::uint32_t ffgt_fanout = 20;
    std::uint32_t ffgt_levels = 3;          // 20^3 == 8000 leaves
    std::uint32_t threads_per_node = 1;
    double per_row_scan_ns = 10.24;         // full node partition scans in ~40 us
    double per_hop_ns = 50.0;
    std::uint64_t node_mem_bytes = 125'000'000;
    std::uint32_t row_ref_bytes = 8;
    std::uint32_t summary_bits_per_key = 1; // key-membership summary width
    EnergyWeights channel_energy_weights;

    void validate() const;
    FabricTopology topology() const {
        return build_ffgt(ffgt_fanout, ffgt_levels, node_count);
    }
};

struct GlobalAddress {
    std::uint64_t value = 0;
};

struct LocalAddress {
    std::uint32_t node = 0;
    std::uint64_t offset = 0;
};

// PGAS decomposition: node = value / node_mem_bytes, offset = remainder.
LocalAddress map_address(const MnmsConfig& cfg, GlobalAddress addr);
GlobalAddress unmap_address(const MnmsConfig& cfg, LocalAddress local);

struct MessageCost {
    std::uint64_t payload_bytes = 0;
    std::uint64_t link_bytes = 0;   // payload * hops
    double latency_ns = 0.0;        // hops * per_hop_ns
};

MessageCost account_message(const FabricTopology& topo, const MnmsConfig& cfg,
                            std::uint32_t src, std::uint32_t dst,
                            std::uint64_t payload_bytes);

}  // namespace mnms
