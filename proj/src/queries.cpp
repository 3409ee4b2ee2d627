#include "mnms/queries.hpp"

#include <algorithm>

#include "mnms/errors.hpp"
#include "mnms/rng.hpp"

namespace mnms {

namespace {

constexpr std::uint32_t kCollectorNode = 0;
constexpr std::uint64_t kDriverStateBytes = 32;

// Phase tags for the join pipelines.
constexpr std::uint32_t kPhaseHashBuild = 1;
constexpr std::uint32_t kPhaseHashProbe = 2;
constexpr std::uint32_t kPhaseSummaryR = 3;
constexpr std::uint32_t kPhaseSummaryS = 4;
constexpr std::uint32_t kPhaseBtreeBuild = 5;
constexpr std::uint32_t kPhaseBtreeProbe = 6;

Instruction ins_halt() {
    Instruction i;
    i.op = Opcode::halt;
    return i;
}

Instruction ins_scan(std::uint32_t rel, std::vector<std::uint8_t> value) {
    Instruction i;
    i.op = Opcode::scan_compare;
    i.scan.relation = rel;
    i.scan.value = std::move(value);
    return i;
}

Instruction ins_route(std::uint32_t rel, std::uint64_t digest_bytes, std::uint32_t fp_bits,
                      std::uint32_t phase) {
    Instruction i;
    i.op = Opcode::scan_route;
    i.route = {rel, digest_bytes, fp_bits, phase};
    return i;
}

Instruction ins_emit(std::uint32_t dst, std::uint64_t per_match_bytes) {
    Instruction i;
    i.op = Opcode::emit;
    i.emit = {dst, 0, per_match_bytes};
    return i;
}

Instruction ins_spawn_all(std::uint32_t program, std::uint64_t state_bytes) {
    Instruction i;
    i.op = Opcode::spawn_all;
    i.spawn_all = {program, state_bytes};
    return i;
}

Instruction ins_batch(Opcode op, std::uint32_t phase, std::uint64_t digest_bytes,
                      std::uint64_t entry_bytes = 16, std::uint32_t summary_phase_s = 0,
                      std::uint64_t fetch_seed = 0) {
    Instruction i;
    i.op = op;
    i.batch.phase = phase;
    i.batch.digest_bytes = digest_bytes;
    i.batch.entry_bytes = entry_bytes;
    i.batch.summary_phase_s = summary_phase_s;
    i.batch.fetch_seed = fetch_seed;
    return i;
}

RelationContext make_context(const Relation& rel, const Placement& placement,
                             const MnmsConfig& cfg) {
    if (placement.row_count() != rel.spec().row_count)
        throw spec_error("placement error: placement covers " +
                         std::to_string(placement.row_count()) + " rows, relation '" +
                         rel.spec().name + "' has " + std::to_string(rel.spec().row_count));
    if (placement.node_count() != cfg.node_count)
        throw spec_error("placement error: placement spans " +
                         std::to_string(placement.node_count()) + " nodes, config has " +
                         std::to_string(cfg.node_count));
    RelationContext ctx;
    ctx.attr_index = rel.planted_attr_index();
    ctx.attr_width = rel.spec().attributes[ctx.attr_index].size_bytes;
    ctx.total_rows = rel.spec().row_count;
    ctx.node_rows.resize(cfg.node_count);
    for (std::uint32_t n = 0; n < cfg.node_count; ++n) ctx.node_rows[n] = placement.rows_on_node(n);
    if (rel.materialized()) {
        ctx.rel = &rel;
        ctx.node_row_ids = placement.bucket_rows();
    }
    return ctx;
}

void spawn_workers(Engine& engine, std::uint32_t program,
                   const std::vector<std::uint64_t>& counts, picos at) {
    for (std::uint32_t node = 0; node < counts.size(); ++node)
        if (counts[node] > 0) engine.spawn(program, node, at, kDriverStateBytes);
}

void collect(Engine& engine, QueryResult& res, bool materialized, bool join) {
    res.engine = engine.report();
    res.report = res.engine.traffic;
    if (materialized) {
        if (join)
            res.pairs = engine.take_join_pairs();
        else
            res.matches = engine.take_select_matches();
    }
    res.log = engine.event_log();
}

std::uint64_t pair_payload(const JoinQuery& q, const MnmsConfig& cfg) {
    if (q.output_payload == JoinOutputPayload::pair_refs) return 2ull * cfg.row_ref_bytes;
    return static_cast<std::uint64_t>(q.relation_r->spec().row_size_bytes) +
           q.relation_s->spec().row_size_bytes;
}

void check_join_query(const JoinQuery& q) {
    if (!q.relation_r || !q.relation_s) throw spec_error("join query lacks relations");
    const Relation& r = *q.relation_r;
    const Relation& s = *q.relation_s;
    const std::uint32_t ir = r.spec().attribute_index(q.attribute);
    const std::uint32_t is = s.spec().attribute_index(q.attribute);
    if (r.spec().attributes[ir].size_bytes != s.spec().attributes[is].size_bytes)
        throw schema_error("join attribute widths differ");
    if (ir != r.planted_attr_index() || is != s.planted_attr_index())
        throw schema_error("join attribute '" + q.attribute + "' is not the planted key");
    if (r.materialized() != s.materialized())
        throw spec_error("join inputs must both be materialized or both metadata-only");
}

}  // namespace

SelectQuery planted_select_query(const Relation& rel, ResultPayload payload) {
    SelectQuery q;
    q.relation = &rel;
    q.attribute = rel.spec().attributes[rel.planted_attr_index()].name;
    q.value = rel.planted_select_value();
    q.result_payload = payload;
    return q;
}

QueryResult mnms_select(const SelectQuery& q, const Placement& placement, const MnmsConfig& cfg,
                        const EngineOptions& opts) {
    if (!q.relation) throw spec_error("select query lacks a relation");
    const Relation& rel = *q.relation;
    const AttributeSpec& attr = rel.spec().attribute(q.attribute);
    if (q.value.size() != attr.size_bytes)
        throw schema_error("select value width " + std::to_string(q.value.size()) +
                           " != attribute width " + std::to_string(attr.size_bytes));

    Engine engine(cfg, opts, mix64(placement.seed() ^ 0x736c6374));
    RelationContext ctx = make_context(rel, placement, cfg);
    // Metadata runs model the planted query: per-node match counts are the
    // planted total split in proportion to residency.
    if (!rel.materialized() &&
        rel.spec().attribute_index(q.attribute) == rel.planted_attr_index()) {
        ctx.node_matches = apportion(rel.planted_match_count(), ctx.node_rows,
                                     mix64(rel.spec().seed ^ 0x6d617463));
    }
    const std::uint32_t rid = engine.add_relation(std::move(ctx));

    const std::uint64_t payload = q.result_payload == ResultPayload::full_row
                                      ? rel.spec().row_size_bytes
                                      : cfg.row_ref_bytes;
    const std::uint32_t scanner = engine.register_program(
        {ins_scan(rid, q.value), ins_emit(kCollectorNode, payload), ins_halt()});
    const std::uint32_t root = engine.register_program(
        {ins_spawn_all(scanner, attr.size_bytes + 16ull), ins_halt()});
    engine.spawn(root, kCollectorNode, 0, kDriverStateBytes);
    engine.run_to_completion();

    QueryResult res;
    collect(engine, res, rel.materialized(), /*join=*/false);
    return res;
}

QueryResult mnms_hash_join(const JoinQuery& q, const Placement& placement_r,
                           const Placement& placement_s, const MnmsConfig& cfg,
                           const EngineOptions& opts) {
    check_join_query(q);
    if (q.strategy == MnmsJoinStrategy::btree)
        throw spec_error("btree strategy runs through mnms_btree_join");
    const Relation& r = *q.relation_r;
    const Relation& s = *q.relation_s;
    const bool materialized = r.materialized();

    Engine engine(cfg, opts, mix64(placement_r.seed() ^ placement_s.seed() ^ 0x6a6f696e));
    const std::uint32_t rid = engine.add_relation(make_context(r, placement_r, cfg));
    const std::uint32_t sid = engine.add_relation(make_context(s, placement_s, cfg));

    const std::uint32_t attr_width =
        r.spec().attributes[r.planted_attr_index()].size_bytes;
    const std::uint64_t digest = attr_width + static_cast<std::uint64_t>(cfg.row_ref_bytes);
    const std::uint64_t pair_bytes = pair_payload(q, cfg);
    const std::uint64_t total_matches = r.planted_match_count();
    const std::uint64_t seed = mix64(r.spec().seed ^ s.spec().seed);

    if (q.strategy == MnmsJoinStrategy::migrate_all) {
        // Build: every R digest migrates to its hash owner and is inserted.
        const std::uint32_t build_driver = engine.register_program(
            {ins_route(rid, digest, 0, kPhaseHashBuild), ins_halt()});
        const std::uint32_t root1 = engine.register_program(
            {ins_spawn_all(build_driver, kDriverStateBytes), ins_halt()});
        engine.spawn(root1, kCollectorNode, 0, kDriverStateBytes);
        StageStats route_r = engine.run_to_completion();

        const auto build_counts = engine.inbox_counts(kPhaseHashBuild);
        const std::uint32_t put_worker = engine.register_program(
            {ins_batch(Opcode::hash_put_batch, kPhaseHashBuild, digest), ins_halt()});
        spawn_workers(engine, put_worker, build_counts, route_r.max_arrival_ps);
        StageStats built = engine.run_to_completion();

        // Probe: S digests migrate the same way once the table is in place.
        const std::uint32_t probe_driver = engine.register_program(
            {ins_route(sid, digest, 0, kPhaseHashProbe), ins_halt()});
        const std::uint32_t root2 = engine.register_program(
            {ins_spawn_all(probe_driver, kDriverStateBytes), ins_halt()});
        engine.spawn(root2, kCollectorNode, built.max_completion_ps, kDriverStateBytes);
        StageStats route_s = engine.run_to_completion();

        const auto probe_counts = engine.inbox_counts(kPhaseHashProbe);
        if (!materialized)
            engine.set_planted_matches(kPhaseHashProbe,
                                       apportion(total_matches, probe_counts, seed));
        const std::uint32_t probe_worker = engine.register_program(
            {ins_batch(Opcode::hash_probe_batch, kPhaseHashProbe, digest),
             ins_emit(kCollectorNode, pair_bytes), ins_halt()});
        spawn_workers(engine, probe_worker, probe_counts, route_s.max_arrival_ps);
        engine.run_to_completion();
    } else {
        // index_assisted: both sides first route per-key membership
        // summaries (fp bits per key); digests migrate only for keys the
        // owner sees on both sides, so fabric traffic scales with matches.
        const std::uint32_t fp = cfg.summary_bits_per_key;
        const std::uint32_t sum_r = engine.register_program(
            {ins_route(rid, digest, fp, kPhaseSummaryR), ins_halt()});
        const std::uint32_t sum_s = engine.register_program(
            {ins_route(sid, digest, fp, kPhaseSummaryS), ins_halt()});
        const std::uint32_t root = engine.register_program(
            {ins_spawn_all(sum_r, kDriverStateBytes), ins_spawn_all(sum_s, kDriverStateBytes),
             ins_halt()});
        engine.spawn(root, kCollectorNode, 0, kDriverStateBytes);
        StageStats summaries = engine.run_to_completion();

        const auto counts_r = engine.inbox_counts(kPhaseSummaryR);
        const auto counts_s = engine.inbox_counts(kPhaseSummaryS);
        if (!materialized)
            engine.set_planted_matches(kPhaseSummaryR,
                                       apportion(total_matches, counts_s, seed));
        const std::uint32_t match_worker = engine.register_program(
            {ins_batch(Opcode::summary_match_batch, kPhaseSummaryR, digest, digest,
                       kPhaseSummaryS, mix64(seed ^ 0x66657463)),
             ins_emit(kCollectorNode, pair_bytes), ins_halt()});
        for (std::uint32_t node = 0; node < cfg.node_count; ++node)
            if (counts_r[node] > 0 || counts_s[node] > 0)
                engine.spawn(match_worker, node, summaries.max_arrival_ps, kDriverStateBytes);
        engine.run_to_completion();
    }

    QueryResult res;
    collect(engine, res, materialized, /*join=*/true);
    return res;
}

BtreeSession::~BtreeSession() = default;

BtreeSession mnms_btree_build(const JoinQuery& q, const Placement& placement_r,
                              const Placement& placement_s, const MnmsConfig& cfg,
                              const EngineOptions& opts) {
    check_join_query(q);
    const Relation& r = *q.relation_r;
    const Relation& s = *q.relation_s;

    BtreeSession session;
    session.engine_ = std::make_unique<Engine>(
        cfg, opts, mix64(placement_r.seed() ^ placement_s.seed() ^ 0x6a6f696e));
    Engine& engine = *session.engine_;
    const std::uint32_t rid = engine.add_relation(make_context(r, placement_r, cfg));
    session.ctx_s_ = engine.add_relation(make_context(s, placement_s, cfg));

    const std::uint32_t attr_width = r.spec().attributes[r.planted_attr_index()].size_bytes;
    session.digest_bytes_ = attr_width + static_cast<std::uint64_t>(cfg.row_ref_bytes);
    session.entry_bytes_ = session.digest_bytes_;
    session.pair_bytes_ = pair_payload(q, cfg);
    session.total_matches_ = r.planted_match_count();
    session.seed_ = mix64(r.spec().seed ^ s.spec().seed ^ 0x6274);
    session.materialized_ = r.materialized();

    const std::uint32_t driver = engine.register_program(
        {ins_route(rid, session.digest_bytes_, 0, kPhaseBtreeBuild), ins_halt()});
    const std::uint32_t root =
        engine.register_program({ins_spawn_all(driver, kDriverStateBytes), ins_halt()});
    engine.spawn(root, kCollectorNode, 0, kDriverStateBytes);
    StageStats routed = engine.run_to_completion();

    const auto counts = engine.inbox_counts(kPhaseBtreeBuild);
    const std::uint32_t worker = engine.register_program(
        {ins_batch(Opcode::btree_build_batch, kPhaseBtreeBuild, session.digest_bytes_,
                   session.entry_bytes_),
         ins_halt()});
    spawn_workers(engine, worker, counts, routed.max_arrival_ps);
    StageStats built = engine.run_to_completion();

    session.prep_ = engine.report().traffic;
    session.prep_completion_ = built.max_completion_ps;
    return session;
}

QueryResult mnms_btree_probe(BtreeSession& session) {
    if (!session.built())
        throw engine_error("btree index missing: run mnms_btree_build before probing");
    Engine& engine = *session.engine_;
    const TrafficReport before = engine.report().traffic;
    const std::uint64_t matches_before = before.match_count;

    const std::uint32_t driver = engine.register_program(
        {ins_route(session.ctx_s_, session.digest_bytes_, 0, kPhaseBtreeProbe), ins_halt()});
    const std::uint32_t root =
        engine.register_program({ins_spawn_all(driver, kDriverStateBytes), ins_halt()});
    engine.spawn(root, kCollectorNode, session.prep_completion_, kDriverStateBytes);
    StageStats routed = engine.run_to_completion();

    const auto counts = engine.inbox_counts(kPhaseBtreeProbe);
    if (!session.materialized_)
        engine.set_planted_matches(kPhaseBtreeProbe,
                                   apportion(session.total_matches_, counts, session.seed_));
    const std::uint32_t worker = engine.register_program(
        {ins_batch(Opcode::btree_find_batch, kPhaseBtreeProbe, session.digest_bytes_,
                   session.entry_bytes_),
         ins_emit(kCollectorNode, session.pair_bytes_), ins_halt()});
    spawn_workers(engine, worker, counts, routed.max_arrival_ps);
    engine.run_to_completion();

    QueryResult res;
    collect(engine, res, session.materialized_, /*join=*/true);
    // Report the probe alone; the build is the session's one-time cost.
    res.report.host_ram_bytes -= before.host_ram_bytes;
    res.report.fabric_payload_bytes -= before.fabric_payload_bytes;
    res.report.fabric_link_bytes -= before.fabric_link_bytes;
    res.report.intra_node_bytes -= before.intra_node_bytes;
    res.report.match_count -= matches_before;
    res.report.response_ms = static_cast<double>(res.engine.completion_ps -
                                                 session.prep_completion_) * 1e-9;
    res.report.apply_energy(engine.config().channel_energy_weights);
    session.prep_completion_ = res.engine.completion_ps;  // allow consecutive probes
    return res;
}

BtreeJoinResult mnms_btree_join(const JoinQuery& q, const Placement& placement_r,
                                const Placement& placement_s, const MnmsConfig& cfg,
                                const EngineOptions& opts) {
    BtreeSession session = mnms_btree_build(q, placement_r, placement_s, cfg, opts);
    BtreeJoinResult out;
    out.prep_report = session.prep_report();
    out.probe = mnms_btree_probe(session);
    return out;
}

std::vector<std::uint64_t> reference_select(const Relation& rel, std::string_view attribute,
                                            const std::vector<std::uint8_t>& value) {
    if (!rel.materialized())
        throw oracle_error("reference_select needs a materialized relation");
    const std::uint32_t attr = rel.spec().attribute_index(attribute);
    std::vector<std::uint64_t> ids;
    for (std::uint64_t row = 0; row < rel.spec().row_count; ++row)
        if (rel.attribute_bytes(row, attr) == value) ids.push_back(row);
    return ids;
}

std::vector<std::pair<std::uint64_t, std::uint64_t>> reference_equijoin(
    const Relation& rel_r, const Relation& rel_s, std::string_view attribute,
    std::uint64_t comparison_budget) {
    if (!rel_r.materialized() || !rel_s.materialized())
        throw oracle_error("reference_equijoin needs materialized relations");
    const std::uint64_t n_r = rel_r.spec().row_count;
    const std::uint64_t n_s = rel_s.spec().row_count;
    if (n_s > 0 && n_r > comparison_budget / n_s)
        throw oracle_error("oracle budget exceeded: " + std::to_string(n_r) + " x " +
                           std::to_string(n_s) + " comparisons > " +
                           std::to_string(comparison_budget));
    const std::uint32_t ar = rel_r.spec().attribute_index(attribute);
    const std::uint32_t as = rel_s.spec().attribute_index(attribute);

    // Decode once, then the verbatim O(n^2) nested loop. A 64-bit prefix
    // short-circuits byte comparison without changing the result.
    auto decode = [](const Relation& rel, std::uint32_t attr, std::uint64_t n,
                     std::vector<std::uint64_t>& prefix,
                     std::vector<std::vector<std::uint8_t>>& bytes) {
        prefix.resize(n);
        bytes.resize(n);
        for (std::uint64_t i = 0; i < n; ++i) {
            bytes[i] = rel.attribute_bytes(i, attr);
            std::uint64_t p = 0;
            for (std::size_t b = 0; b < bytes[i].size() && b < 8; ++b)
                p |= static_cast<std::uint64_t>(bytes[i][b]) << (8 * b);
            prefix[i] = p;
        }
    };
    std::vector<std::uint64_t> pr, ps;
    std::vector<std::vector<std::uint8_t>> br, bs;
    decode(rel_r, ar, n_r, pr, br);
    decode(rel_s, as, n_s, ps, bs);

    std::vector<std::pair<std::uint64_t, std::uint64_t>> pairs;
    for (std::uint64_t i = 0; i < n_r; ++i)
        for (std::uint64_t j = 0; j < n_s; ++j)
            if (pr[i] == ps[j] && br[i] == bs[j]) pairs.emplace_back(i, j);
    return pairs;
}

}  // namespace mnms
