#pragma once

#include <cstdint>

namespace mnms {

// Relative energy cost per byte on each traffic channel. Host<->RAM bytes
// travel the longest energy distance, intra-node bytes the shortest.
struct EnergyWeights {
    double host = 1.0;
    double fabric = 0.1;
    double intra = 0.01;
};

// Universal output record of every cost model and simulation run.
// Byte counters are exact integers; fabric_link_bytes is payload weighted
// by hop count and is always >= fabric_payload_bytes (same-node transfers
// are accounted as intra-node, never as fabric).
struct TrafficReport {
    std::uint64_t host_ram_bytes = 0;
    std::uint64_t fabric_payload_bytes = 0;
    std::uint64_t fabric_link_bytes = 0;
    std::uint64_t intra_node_bytes = 0;
    double response_ms = 0.0;
    std::uint64_t match_count = 0;
    double energy_proxy = 0.0;

    void apply_energy(const EnergyWeights& w) {
        energy_proxy = static_cast<double>(host_ram_bytes) * w.host +
                       static_cast<double>(fabric_payload_bytes) * w.fabric +
                       static_cast<double>(intra_node_bytes) * w.intra;
    }
};

}  // namespace mnms
