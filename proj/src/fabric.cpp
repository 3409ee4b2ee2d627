#include "mnms/fabric.hpp"

#include <string>

#include "mnms/errors.hpp"

namespace mnms {

namespace {

std::uint64_t overlap_(std::uint32_t lo, std::uint32_t hi, std::uint32_t s, std::uint32_t e) {
    std::uint32_t a = lo > s ? lo : s;
    std::uint32_t b = hi < e ? hi : e;
    return a < b ? b - a : 0;
}

// fanout^levels, saturating well above any sane leaf count.
std::uint64_t capacity(std::uint32_t fanout, std::uint32_t levels) {
    std::uint64_t cap = 1;
    for (std::uint32_t i = 0; i < levels; ++i) {
        if (cap > (std::uint64_t{1} << 40)) return std::uint64_t{1} << 40;
        cap *= fanout;
    }
    return cap;
}

}  // namespace

FabricTopology::FabricTopology(std::uint32_t fanout, std::uint32_t levels,
                               std::uint32_t leaf_count)
    : fanout_(fanout), levels_(levels), leaf_count_(leaf_count) {
    if (fanout < 2) throw topology_error("fat-tree fanout must be >= 2");
    if (levels < 1) throw topology_error("fat-tree needs at least one level");
    if (leaf_count == 0) throw topology_error("fat-tree needs at least one leaf");
    if (leaf_count > capacity(fanout, levels))
        throw topology_error("leaf count " + std::to_string(leaf_count) + " exceeds capacity " +
                             std::to_string(capacity(fanout, levels)));
}

std::uint32_t FabricTopology::hops(std::uint32_t a, std::uint32_t b) const {
    if (a >= leaf_count_ || b >= leaf_count_)
        throw topology_error("leaf index out of range");
    std::uint32_t level = 0;
    std::uint64_t x = a, y = b;
    while (x != y) {
        x /= fanout_;
        y /= fanout_;
        ++level;
    }
    return 2 * level;
}

void FabricTopology::subtree(std::uint32_t src, std::uint32_t level, std::uint32_t& start,
                             std::uint32_t& end) const {
    std::uint64_t width = 1;
    for (std::uint32_t i = 0; i < level; ++i) width *= fanout_;
    std::uint64_t s = (src / width) * width;
    std::uint64_t e = s + width;
    start = static_cast<std::uint32_t>(s);
    end = static_cast<std::uint32_t>(e < leaf_count_ ? e : leaf_count_);
}

std::uint64_t FabricTopology::hops_sum(std::uint32_t src, std::uint32_t lo,
                                       std::uint32_t hi) const {
    if (src >= leaf_count_ || hi > leaf_count_ || lo > hi)
        throw topology_error("leaf interval out of range");
    // Leaves in subtree(l) \ subtree(l-1) sit exactly 2l hops away.
    std::uint64_t sum = 0;
    std::uint32_t prev_start = src, prev_end = src + 1;  // level 0: src itself
    for (std::uint32_t level = 1; level <= levels_; ++level) {
        std::uint32_t s, e;
        subtree(src, level, s, e);
        std::uint64_t outer = overlap_(lo, hi, s, e);
        std::uint64_t inner = overlap_(lo, hi, prev_start, prev_end);
        sum += 2ull * level * (outer - inner);
        prev_start = s;
        prev_end = e;
    }
    return sum;
}

std::uint32_t FabricTopology::hops_max(std::uint32_t src, std::uint32_t lo,
                                       std::uint32_t hi) const {
    if (src >= leaf_count_ || hi > leaf_count_ || lo > hi)
        throw topology_error("leaf interval out of range");
    if (lo >= hi) return 0;
    for (std::uint32_t level = levels_; level >= 1; --level) {
        std::uint32_t s, e;
        subtree(src, level - 1, s, e);
        // Anything outside the level-(l-1) subtree is 2*level hops away.
        if (lo < s || hi > e) return 2 * level;
    }
    return 0;  // interval is {src} alone
}

FabricTopology build_ffgt(std::uint32_t fanout, std::uint32_t levels, std::uint32_t leaf_count) {
    return FabricTopology(fanout, levels, leaf_count);
}

void MnmsConfig::validate() const {
    if (node_count == 0) throw config_error("mnms.node_count must be positive");
    if (threads_per_node == 0) throw config_error("mnms.threads_per_node must be >= 1");
    if (per_row_scan_ns <= 0) throw config_error("mnms.per_row_scan_ns must be positive");
    if (per_hop_ns < 0) throw config_error("mnms.per_hop_ns must be non-negative");
    if (node_mem_bytes == 0) throw config_error("mnms.node_mem_bytes must be positive");
    if (row_ref_bytes == 0) throw config_error("mnms.row_ref_bytes must be positive");
    if (capacity(ffgt_fanout, ffgt_levels) < node_count)
        throw config_error("ffgt_fanout^ffgt_levels must cover node_count");
}

LocalAddress map_address(const MnmsConfig& cfg, GlobalAddress addr) {
    const std::uint64_t space = cfg.node_mem_bytes * cfg.node_count;
    if (addr.value >= space)
        throw address_error("global address " + std::to_string(addr.value) +
                            " outside PGAS space of " + std::to_string(space) + " bytes");
    return {static_cast<std::uint32_t>(addr.value / cfg.node_mem_bytes),
            addr.value % cfg.node_mem_bytes};
}

GlobalAddress unmap_address(const MnmsConfig& cfg, LocalAddress local) {
    if (local.node >= cfg.node_count) throw address_error("node index out of range");
    if (local.offset >= cfg.node_mem_bytes) throw address_error("local offset out of range");
    return {local.node * cfg.node_mem_bytes + local.offset};
}

MessageCost account_message(const FabricTopology& topo, const MnmsConfig& cfg,
                            std::uint32_t src, std::uint32_t dst,
                            std::uint64_t payload_bytes) {
    const std::uint32_t h = topo.hops(src, dst);
    return {payload_bytes, payload_bytes * h, h * cfg.per_hop_ns};
}

}  // namespace mnms
