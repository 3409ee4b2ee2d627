// Python bindings for the query cost simulator: machine configs, the
// classical closed-form models, the MNMS execution paths, and the scenario
// harness.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mnms/baseline.hpp"
#include "mnms/errors.hpp"
#include "mnms/harness.hpp"
#include "mnms/queries.hpp"
#include "mnms/relation.hpp"

namespace py = pybind11;
using namespace mnms;

namespace {

RelationSpec make_spec(const std::string& name, std::uint64_t rows, std::uint32_t row_bytes,
                       std::uint32_t attr_bytes, std::uint64_t seed, bool materialized) {
    RelationSpec spec;
    spec.name = name;
    spec.row_count = rows;
    spec.row_size_bytes = row_bytes;
    spec.attributes = {{"key", attr_bytes, true}};
    spec.seed = seed;
    spec.materialized = materialized;
    return spec;
}

QueryResult select_run(const RelationSpec& spec, double selectivity, const MnmsConfig& cfg,
                       std::uint64_t placement_seed, ResultPayload payload) {
    Relation rel = make_relation(spec, SelectivitySpec::of(selectivity, spec.row_count));
    Placement pl = place_rows(rel, cfg.node_count, placement_seed);
    return mnms_select(planted_select_query(rel, payload), pl, cfg);
}

QueryResult hash_join_run(const RelationSpec& spec_r, const RelationSpec& spec_s,
                          double output_fraction, MnmsJoinStrategy strategy,
                          const MnmsConfig& cfg, std::uint64_t placement_seed,
                          JoinOutputPayload payload) {
    auto [rel_r, rel_s] = make_join_pair(spec_r, spec_s, "key", output_fraction);
    Placement pl_r = place_rows(rel_r, cfg.node_count, placement_seed);
    Placement pl_s = place_rows(rel_s, cfg.node_count, placement_seed ^ 0x5353);
    JoinQuery q;
    q.relation_r = &rel_r;
    q.relation_s = &rel_s;
    q.attribute = "key";
    q.strategy = strategy;
    q.output_payload = payload;
    return mnms_hash_join(q, pl_r, pl_s, cfg);
}

py::tuple btree_join_run(const RelationSpec& spec_r, const RelationSpec& spec_s,
                         double output_fraction, const MnmsConfig& cfg,
                         std::uint64_t placement_seed, JoinOutputPayload payload) {
    auto [rel_r, rel_s] = make_join_pair(spec_r, spec_s, "key", output_fraction);
    Placement pl_r = place_rows(rel_r, cfg.node_count, placement_seed);
    Placement pl_s = place_rows(rel_s, cfg.node_count, placement_seed ^ 0x5353);
    JoinQuery q;
    q.relation_r = &rel_r;
    q.relation_s = &rel_s;
    q.attribute = "key";
    q.strategy = MnmsJoinStrategy::btree;
    q.output_payload = payload;
    BtreeJoinResult res = mnms_btree_join(q, pl_r, pl_s, cfg);
    return py::make_tuple(res.prep_report, res.probe);
}

}  // namespace

PYBIND11_MODULE(mnms_sim, m) {
    m.doc() = "classical vs migratory near-memory query cost simulator";

    py::register_exception<mnms::error>(m, "MnmsError");

    py::enum_<SelectMode>(m, "SelectMode")
        .value("full_scan", SelectMode::full_scan)
        .value("block_granular", SelectMode::block_granular)
        .value("indexed", SelectMode::indexed);
    py::enum_<JoinStrategy>(m, "JoinStrategy")
        .value("nested_loop", JoinStrategy::nested_loop)
        .value("hash", JoinStrategy::hash)
        .value("sort_merge", JoinStrategy::sort_merge);
    py::enum_<MnmsJoinStrategy>(m, "MnmsJoinStrategy")
        .value("migrate_all", MnmsJoinStrategy::migrate_all)
        .value("index_assisted", MnmsJoinStrategy::index_assisted)
        .value("btree", MnmsJoinStrategy::btree);
    py::enum_<ResultPayload>(m, "ResultPayload")
        .value("full_row", ResultPayload::full_row)
        .value("row_ref", ResultPayload::row_ref);
    py::enum_<JoinOutputPayload>(m, "JoinOutputPayload")
        .value("pair_refs", JoinOutputPayload::pair_refs)
        .value("concatenated_rows", JoinOutputPayload::concatenated_rows);
    py::enum_<QueryKind>(m, "QueryKind")
        .value("select", QueryKind::select)
        .value("join", QueryKind::join);

    py::class_<AttributeSpec>(m, "AttributeSpec")
        .def(py::init<>())
        .def_readwrite("name", &AttributeSpec::name)
        .def_readwrite("size_bytes", &AttributeSpec::size_bytes)
        .def_readwrite("indexed", &AttributeSpec::indexed);

    py::class_<RelationSpec>(m, "RelationSpec")
        .def(py::init(&make_spec), py::arg("name"), py::arg("rows"), py::arg("row_bytes"),
             py::arg("attr_bytes") = 8, py::arg("seed") = 0, py::arg("materialized") = false)
        .def_readwrite("name", &RelationSpec::name)
        .def_readwrite("row_count", &RelationSpec::row_count)
        .def_readwrite("row_size_bytes", &RelationSpec::row_size_bytes)
        .def_readwrite("attributes", &RelationSpec::attributes)
        .def_readwrite("seed", &RelationSpec::seed)
        .def_readwrite("materialized", &RelationSpec::materialized)
        .def_property_readonly("relation_bytes", &RelationSpec::relation_bytes);

    py::class_<SelectivitySpec>(m, "SelectivitySpec")
        .def_static("of", &SelectivitySpec::of, py::arg("fraction"), py::arg("n"))
        .def_readonly("fraction", &SelectivitySpec::fraction)
        .def_readonly("planted_match_count", &SelectivitySpec::planted_match_count);

    py::class_<EnergyWeights>(m, "EnergyWeights")
        .def(py::init<>())
        .def_readwrite("host", &EnergyWeights::host)
        .def_readwrite("fabric", &EnergyWeights::fabric)
        .def_readwrite("intra", &EnergyWeights::intra);

    py::class_<TrafficReport>(m, "TrafficReport")
        .def_readonly("host_ram_bytes", &TrafficReport::host_ram_bytes)
        .def_readonly("fabric_payload_bytes", &TrafficReport::fabric_payload_bytes)
        .def_readonly("fabric_link_bytes", &TrafficReport::fabric_link_bytes)
        .def_readonly("intra_node_bytes", &TrafficReport::intra_node_bytes)
        .def_readonly("response_ms", &TrafficReport::response_ms)
        .def_readonly("match_count", &TrafficReport::match_count)
        .def_readonly("energy_proxy", &TrafficReport::energy_proxy)
        .def("__repr__", [](const TrafficReport& t) {
            return "TrafficReport(host=" + std::to_string(t.host_ram_bytes) +
                   ", intra=" + std::to_string(t.intra_node_bytes) +
                   ", fabric_payload=" + std::to_string(t.fabric_payload_bytes) +
                   ", response_ms=" + std::to_string(t.response_ms) +
                   ", matches=" + std::to_string(t.match_count) + ")";
        });

    py::class_<ClassicalConfig>(m, "ClassicalConfig")
        .def(py::init<>())
        .def_readwrite("cache_line_bytes", &ClassicalConfig::cache_line_bytes)
        .def_readwrite("round_trip_factor", &ClassicalConfig::round_trip_factor)
        .def_readwrite("per_row_visit_ns", &ClassicalConfig::per_row_visit_ns)
        .def_readwrite("row_ref_bytes", &ClassicalConfig::row_ref_bytes)
        .def_readwrite("host_bandwidth_bytes_per_s",
                       &ClassicalConfig::host_bandwidth_bytes_per_s);

    py::class_<MnmsConfig>(m, "MnmsConfig")
        .def(py::init<>())
        .def_readwrite("node_count", &MnmsConfig::node_count)
        .def_readwrite("ffgt_fanout", &MnmsConfig::ffgt_fanout)
        .def_readwrite("ffgt_levels", &MnmsConfig::ffgt_levels)
        .def_readwrite("threads_per_node", &MnmsConfig::threads_per_node)
        .def_readwrite("per_row_scan_ns", &MnmsConfig::per_row_scan_ns)
        .def_readwrite("per_hop_ns", &MnmsConfig::per_hop_ns)
        .def_readwrite("node_mem_bytes", &MnmsConfig::node_mem_bytes)
        .def_readwrite("row_ref_bytes", &MnmsConfig::row_ref_bytes)
        .def_readwrite("summary_bits_per_key", &MnmsConfig::summary_bits_per_key)
        .def_readwrite("channel_energy_weights", &MnmsConfig::channel_energy_weights);

    py::class_<EngineReport>(m, "EngineReport")
        .def_readonly("spawned", &EngineReport::spawned)
        .def_readonly("retired", &EngineReport::retired)
        .def_readonly("live", &EngineReport::live)
        .def_readonly("events_processed", &EngineReport::events_processed)
        .def_readonly("max_concurrent", &EngineReport::max_concurrent);

    py::class_<QueryResult>(m, "QueryResult")
        .def_readonly("report", &QueryResult::report)
        .def_readonly("engine", &QueryResult::engine)
        .def_readonly("matches", &QueryResult::matches)
        .def_readonly("pairs", &QueryResult::pairs);

    m.def(
        "classical_select",
        [](const RelationSpec& spec, double selectivity, SelectMode mode,
           const ClassicalConfig& cfg) {
            return classical_select(spec, spec.attributes.at(0),
                                    SelectivitySpec::of(selectivity, spec.row_count), mode,
                                    cfg);
        },
        py::arg("spec"), py::arg("selectivity"), py::arg("mode") = SelectMode::full_scan,
        py::arg("config") = ClassicalConfig{});

    m.def(
        "classical_join",
        [](const RelationSpec& r, const RelationSpec& s, double output_fraction,
           JoinStrategy strategy, bool r_indexed, bool s_indexed, const ClassicalConfig& cfg) {
            return classical_join(r, s, r.attributes.at(0), output_fraction, strategy,
                                  r_indexed, s_indexed, cfg);
        },
        py::arg("r"), py::arg("s"), py::arg("output_fraction"),
        py::arg("strategy") = JoinStrategy::hash, py::arg("r_indexed") = false,
        py::arg("s_indexed") = false, py::arg("config") = ClassicalConfig{});

    m.def("mnms_select", &select_run, py::arg("spec"), py::arg("selectivity"),
          py::arg("config") = MnmsConfig{}, py::arg("placement_seed") = 42,
          py::arg("payload") = ResultPayload::full_row,
          "Broadcast-scan SELECT over the memory nodes; returns a QueryResult");

    m.def("mnms_hash_join", &hash_join_run, py::arg("r"), py::arg("s"),
          py::arg("output_fraction"), py::arg("strategy") = MnmsJoinStrategy::migrate_all,
          py::arg("config") = MnmsConfig{}, py::arg("placement_seed") = 42,
          py::arg("payload") = JoinOutputPayload::pair_refs);

    m.def("mnms_btree_join", &btree_join_run, py::arg("r"), py::arg("s"),
          py::arg("output_fraction"), py::arg("config") = MnmsConfig{},
          py::arg("placement_seed") = 42, py::arg("payload") = JoinOutputPayload::pair_refs,
          "Returns (prep_report, probe_result); the index build is the one-time cost");

    py::class_<Scenario>(m, "Scenario")
        .def_readwrite("id", &Scenario::id)
        .def_readonly("description", &Scenario::description)
        .def_readwrite("kind", &Scenario::kind)
        .def_readwrite("relation", &Scenario::relation)
        .def_readwrite("relation2", &Scenario::relation2)
        .def_readwrite("attr_sweep", &Scenario::attr_sweep)
        .def_readwrite("selectivity_sweep", &Scenario::selectivity_sweep)
        .def_readwrite("classical", &Scenario::classical)
        .def_readwrite("mnms", &Scenario::mnms)
        .def_readwrite("seed", &Scenario::seed);

    py::class_<ResultRow>(m, "ResultRow")
        .def_readonly("scenario_id", &ResultRow::scenario_id)
        .def_readonly("architecture", &ResultRow::architecture)
        .def_readonly("kind", &ResultRow::kind)
        .def_readonly("n_rows", &ResultRow::n_rows)
        .def_readonly("attr_bytes", &ResultRow::attr_bytes)
        .def_readonly("selectivity", &ResultRow::selectivity)
        .def_readonly("strategy", &ResultRow::strategy)
        .def_readonly("traffic", &ResultRow::traffic)
        .def_readonly("ratio_vs_classical", &ResultRow::ratio_vs_classical);

    m.def("catalog", &catalog, "Built-in scenarios");
    m.def("find_scenario", &find_scenario, py::arg("id"));
    m.def("run_scenario", &run_scenario, py::arg("scenario"));
    m.def("csv_string", &csv_string, py::arg("rows"));
    m.def(
        "verify",
        [](std::uint64_t n, const std::vector<std::uint64_t>& seeds, QueryKind kind) {
            VerifyReport rep = verify(n, seeds, kind);
            py::list out;
            for (const auto& s : rep.seeds)
                out.append(py::make_tuple(s.seed, s.passed, s.detail));
            return py::make_tuple(rep.all_passed, out);
        },
        py::arg("n"), py::arg("seeds"), py::arg("kind"),
        "Compare MNMS execution against the brute-force oracle per seed");
}
