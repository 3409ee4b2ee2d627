#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "mnms/errors.hpp"
#include "mnms/fabric.hpp"
#include "mnms/rng.hpp"

using namespace mnms;

TEST_CASE("fat-tree construction") {
    CHECK_NOTHROW(build_ffgt(20, 3, 8000));  // 20^3 holds the default node count exactly
    CHECK_NOTHROW(build_ffgt(2, 1, 2));
    CHECK_THROWS_AS(build_ffgt(2, 1, 3), topology_error);
    CHECK_THROWS_AS(build_ffgt(1, 3, 1), topology_error);
    CHECK_THROWS_AS(build_ffgt(4, 0, 1), topology_error);
}

TEST_CASE("hop distances on the default tree") {
    FabricTopology topo = build_ffgt(20, 3, 8000);
    CHECK(topo.hops(17, 17) == 0);
    CHECK(topo.hops(0, 1) == 2);      // same first-level switch
    CHECK(topo.hops(0, 399) == 4);    // same second-level switch
    CHECK(topo.hops(0, 7999) == 6);   // distinct top subtrees
    CHECK_THROWS_AS(topo.hops(0, 8000), topology_error);
}

TEST_CASE("hops is a metric bounded by twice the levels") {
    std::uint64_t rng = 0;
    for (int t = 0; t < 40; ++t) {
        const std::uint32_t fanout = 2 + mix64(rng++) % 6;
        const std::uint32_t levels = 1 + mix64(rng++) % 4;
        std::uint64_t cap = 1;
        for (std::uint32_t i = 0; i < levels; ++i) cap *= fanout;
        const std::uint32_t leaves = 1 + mix64(rng++) % cap;
        FabricTopology topo = build_ffgt(fanout, levels, leaves);
        for (int s = 0; s < 50; ++s) {
            const std::uint32_t a = mix64(rng++) % leaves;
            const std::uint32_t b = mix64(rng++) % leaves;
            const std::uint32_t c = mix64(rng++) % leaves;
            CHECK(topo.hops(a, b) == topo.hops(b, a));
            CHECK((topo.hops(a, b) == 0) == (a == b));
            CHECK(topo.hops(a, c) <= topo.hops(a, b) + topo.hops(b, c));
            CHECK(topo.hops(a, b) <= 2 * levels);
        }
    }
}

TEST_CASE("interval hop sums and maxima agree with brute force") {
    std::uint64_t rng = 1000;
    for (int t = 0; t < 30; ++t) {
        const std::uint32_t fanout = 2 + mix64(rng++) % 5;
        const std::uint32_t levels = 1 + mix64(rng++) % 3;
        std::uint64_t cap = 1;
        for (std::uint32_t i = 0; i < levels; ++i) cap *= fanout;
        const std::uint32_t leaves = 1 + mix64(rng++) % cap;
        FabricTopology topo = build_ffgt(fanout, levels, leaves);
        for (int s = 0; s < 20; ++s) {
            const std::uint32_t src = mix64(rng++) % leaves;
            std::uint32_t lo = mix64(rng++) % (leaves + 1);
            std::uint32_t hi = mix64(rng++) % (leaves + 1);
            if (lo > hi) std::swap(lo, hi);
            std::uint64_t want_sum = 0;
            std::uint32_t want_max = 0;
            for (std::uint32_t o = lo; o < hi; ++o) {
                want_sum += topo.hops(src, o);
                want_max = std::max(want_max, topo.hops(src, o));
            }
            CHECK(topo.hops_sum(src, lo, hi) == want_sum);
            CHECK(topo.hops_max(src, lo, hi) == want_max);
        }
    }
}

TEST_CASE("PGAS mapping decomposes and round-trips") {
    MnmsConfig cfg;
    cfg.node_count = 64;
    cfg.ffgt_fanout = 4;
    cfg.ffgt_levels = 3;
    cfg.node_mem_bytes = 1 << 20;

    CHECK(map_address(cfg, {0}).node == 0);
    CHECK(map_address(cfg, {0}).offset == 0);
    LocalAddress boundary = map_address(cfg, {cfg.node_mem_bytes});
    CHECK(boundary.node == 1);
    CHECK(boundary.offset == 0);

    const std::uint64_t space = cfg.node_mem_bytes * cfg.node_count;
    for (int i = 0; i < 10'000; ++i) {
        GlobalAddress addr{counter_rng(7, 0, i) % space};
        LocalAddress local = map_address(cfg, addr);
        CHECK(local.node < cfg.node_count);
        CHECK(local.offset < cfg.node_mem_bytes);
        CHECK(unmap_address(cfg, local).value == addr.value);
    }
    CHECK_THROWS_AS(map_address(cfg, {space}), address_error);
    CHECK_THROWS_AS(unmap_address(cfg, {cfg.node_count, 0}), address_error);
    CHECK_THROWS_AS(unmap_address(cfg, {0, cfg.node_mem_bytes}), address_error);
}

TEST_CASE("message accounting") {
    MnmsConfig cfg;
    FabricTopology topo = cfg.topology();

    MessageCost self = account_message(topo, cfg, 5, 5, 100);
    CHECK(self.payload_bytes == 100);
    CHECK(self.link_bytes == 0);
    CHECK(self.latency_ns == 0.0);

    MessageCost near = account_message(topo, cfg, 0, 1, 16);  // 2 hops
    CHECK(near.payload_bytes == 16);
    CHECK(near.link_bytes == 32);
    CHECK(near.latency_ns == doctest::Approx(100.0));

    MessageCost far = account_message(topo, cfg, 0, 7999, 0);  // 6 hops, empty payload
    CHECK(far.payload_bytes == 0);
    CHECK(far.link_bytes == 0);
    CHECK(far.latency_ns == doctest::Approx(300.0));
}

TEST_CASE("config validation") {
    MnmsConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.node_count = 8001;  // 20^3 cannot hold 8001 leaves
    CHECK_THROWS_AS(cfg.validate(), config_error);
    cfg = MnmsConfig{};
    cfg.threads_per_node = 0;
    CHECK_THROWS_AS(cfg.validate(), config_error);
}
