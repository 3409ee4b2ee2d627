#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mnms/engine.hpp"
#include "mnms/fabric.hpp"
#include "mnms/relation.hpp"
#include "mnms/report.hpp"

namespace mnms {

enum class ResultPayload { full_row, row_ref };
enum class JoinOutputPayload { pair_refs, concatenated_rows };
enum class MnmsJoinStrategy { migrate_all, index_assisted, btree };

struct SelectQuery {
    const Relation* relation = nullptr;
    std::string attribute;
    std::vector<std::uint8_t> value;   // must be exactly the attribute width
    ResultPayload result_payload = ResultPayload::full_row;
};

struct JoinQuery {
    const Relation* relation_r = nullptr;
    const Relation* relation_s = nullptr;
    std::string attribute;
    MnmsJoinStrategy strategy = MnmsJoinStrategy::migrate_all;
    JoinOutputPayload output_payload = JoinOutputPayload::pair_refs;
};

struct QueryResult {
    TrafficReport report;
    EngineReport engine;
    std::vector<std::uint64_t> matches;                             // materialized select
    std::vector<std::pair<std::uint64_t, std::uint64_t>> pairs;     // materialized join
    std::vector<EventLogLine> log;                                  // when log_events is set
};

// The planted query against a relation built by make_relation.
SelectQuery planted_select_query(const Relation& rel,
                                 ResultPayload payload = ResultPayload::full_row);

// Broadcast-spawns one scanner threadlet per node; matches are emitted to
// the collector (node 0) with full_row or row_ref payload.
QueryResult mnms_select(const SelectQuery& q, const Placement& placement, const MnmsConfig& cfg,
                        const EngineOptions& opts = {});

// Parallel hash-partitioned equijoin, strategy migrate_all or
// index_assisted. Build digests are (attr width + row_ref_bytes); the
// index_assisted variant exchanges per-key membership summaries first and
// migrates digests only for keys present on both sides of an owner.
QueryResult mnms_hash_join(const JoinQuery& q, const Placement& placement_r,
                           const Placement& placement_s, const MnmsConfig& cfg,
                           const EngineOptions& opts = {});

// Key-partitioned ordered index over R, built once and probed per join.
// Probes cost ceil(log2(local index size)) node visits each.
class BtreeSession {
  public:
    BtreeSession() = default;
    BtreeSession(BtreeSession&&) = default;
    BtreeSession& operator=(BtreeSession&&) = default;
    ~BtreeSession();

    bool built() const { return engine_ != nullptr; }
    const TrafficReport& prep_report() const { return prep_; }

  private:
    friend BtreeSession mnms_btree_build(const JoinQuery&, const Placement&, const Placement&,
                                         const MnmsConfig&, const EngineOptions&);
    friend QueryResult mnms_btree_probe(BtreeSession&);

    std::unique_ptr<Engine> engine_;
    TrafficReport prep_;
    picos prep_completion_ = 0;
    std::uint32_t ctx_s_ = 0;
    std::uint64_t digest_bytes_ = 16;
    std::uint64_t entry_bytes_ = 16;
    std::uint64_t pair_bytes_ = 16;
    std::uint64_t total_matches_ = 0;
    std::uint64_t seed_ = 0;
    bool materialized_ = false;
};

BtreeSession mnms_btree_build(const JoinQuery& q, const Placement& placement_r,
                              const Placement& placement_s, const MnmsConfig& cfg,
                              const EngineOptions& opts = {});

// engine_error if the session holds no index.
QueryResult mnms_btree_probe(BtreeSession& session);

struct BtreeJoinResult {
    TrafficReport prep_report;   // one-time index preparation, reported separately
    QueryResult probe;
};

BtreeJoinResult mnms_btree_join(const JoinQuery& q, const Placement& placement_r,
                                const Placement& placement_s, const MnmsConfig& cfg,
                                const EngineOptions& opts = {});

// Functional oracles over materialized relations; byte-level scans with no
// dependence on the engine or any cost model.
std::vector<std::uint64_t> reference_select(const Relation& rel, std::string_view attribute,
                                            const std::vector<std::uint8_t>& value);

std::vector<std::pair<std::uint64_t, std::uint64_t>> reference_equijoin(
    const Relation& rel_r, const Relation& rel_s, std::string_view attribute,
    std::uint64_t comparison_budget = 10'000'000'000ull);

}  // namespace mnms
