#include "mnms/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "mnms/errors.hpp"
#include "mnms/rng.hpp"

namespace mnms {

namespace {

std::string fmt_double(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

std::string fmt_fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = s.find(sep, start);
        if (pos == std::string::npos) {
            out.push_back(s.substr(start));
            return out;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        throw config_error("key '" + key + "': expected unsigned integer, got '" + v + "'");
    return out;
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        double out = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw config_error("key '" + key + "': expected number, got '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw config_error("key '" + key + "': expected true/false, got '" + v + "'");
}

SelectMode parse_select_mode(const std::string& v) {
    if (v == "full_scan") return SelectMode::full_scan;
    if (v == "block_granular") return SelectMode::block_granular;
    if (v == "indexed") return SelectMode::indexed;
    throw config_error("classical.select_mode '" + v +
                       "': accepted values are full_scan, block_granular, indexed");
}

JoinStrategy parse_join_strategy(const std::string& v) {
    if (v == "nested_loop") return JoinStrategy::nested_loop;
    if (v == "hash") return JoinStrategy::hash;
    if (v == "sort_merge") return JoinStrategy::sort_merge;
    throw config_error("classical.join_strategy '" + v +
                       "': accepted values are nested_loop, hash, sort_merge");
}

MnmsJoinStrategy parse_mnms_strategy(const std::string& v) {
    if (v == "migrate_all") return MnmsJoinStrategy::migrate_all;
    if (v == "index_assisted") return MnmsJoinStrategy::index_assisted;
    if (v == "btree") return MnmsJoinStrategy::btree;
    throw config_error("mnms.join_strategies '" + v +
                       "': accepted values are migrate_all, index_assisted, btree");
}

const char* const kAcceptedKeys =
    "scenario.base scenario.id scenario.kind scenario.seed "
    "relation.name relation.rows relation.row_bytes relation.seed "
    "relation2.name relation2.rows relation2.row_bytes relation2.seed "
    "sweep.attr_bytes sweep.selectivity "
    "classical.cache_line_bytes classical.round_trip_factor classical.per_row_visit_ns "
    "classical.row_ref_bytes classical.host_bandwidth_bytes_per_s classical.select_mode "
    "classical.join_strategy "
    "mnms.node_count mnms.ffgt_fanout mnms.ffgt_levels mnms.threads_per_node "
    "mnms.per_row_scan_ns mnms.per_hop_ns mnms.node_mem_bytes mnms.row_ref_bytes "
    "mnms.summary_bits_per_key mnms.energy_host mnms.energy_fabric mnms.energy_intra "
    "mnms.select_payload mnms.join_payload mnms.join_strategies "
    "engine.per_row_events engine.step_budget";

RelationSpec cell_spec(const RelationSpec& base, std::uint32_t attr_bytes) {
    RelationSpec spec = base;
    spec.attributes = {{"key", attr_bytes, true}};
    return spec;
}

ResultRow base_row(const Scenario& sc, std::uint32_t attr_bytes, double sel) {
    ResultRow row;
    row.scenario_id = sc.id;
    row.kind = to_string(sc.kind);
    row.n_rows = sc.relation.row_count;
    row.row_bytes = sc.relation.row_size_bytes;
    row.attr_bytes = attr_bytes;
    row.selectivity = sel;
    return row;
}

}  // namespace

const char* to_string(QueryKind k) { return k == QueryKind::select ? "select" : "join"; }

const char* to_string(SelectMode m) {
    switch (m) {
        case SelectMode::full_scan: return "full_scan";
        case SelectMode::block_granular: return "block_granular";
        case SelectMode::indexed: return "indexed";
    }
    return "?";
}

const char* to_string(JoinStrategy s) {
    switch (s) {
        case JoinStrategy::nested_loop: return "nested_loop";
        case JoinStrategy::hash: return "hash";
        case JoinStrategy::sort_merge: return "sort_merge";
    }
    return "?";
}

const char* to_string(MnmsJoinStrategy s) {
    switch (s) {
        case MnmsJoinStrategy::migrate_all: return "migrate_all";
        case MnmsJoinStrategy::index_assisted: return "index_assisted";
        case MnmsJoinStrategy::btree: return "btree";
    }
    return "?";
}

void Scenario::validate() const {
    if (id.empty()) throw config_error("scenario.id must be set");
    if (attr_sweep.empty()) throw config_error("sweep.attr_bytes must not be empty");
    if (selectivity_sweep.empty()) throw config_error("sweep.selectivity must not be empty");
    classical.validate();
    mnms.validate();
    if (kind == QueryKind::join && mnms_strategies.empty())
        throw config_error("mnms.join_strategies must not be empty for join scenarios");
}

std::uint64_t classical_comparison_traffic(const TrafficReport& t) { return t.host_ram_bytes; }

std::uint64_t mnms_comparison_traffic(QueryKind kind, const TrafficReport& t) {
    if (kind == QueryKind::select) return t.intra_node_bytes + t.fabric_payload_bytes;
    return t.fabric_payload_bytes;
}

std::vector<Scenario> catalog() {
    Scenario sel;
    sel.id = "select-paper";
    sel.description =
        "SELECT on a 1 TB relation (31.25M rows x 32 kB): classical full scan vs "
        "one scanner threadlet per memory node";
    sel.kind = QueryKind::select;
    sel.relation.name = "r";
    sel.relation.row_count = 31'250'000;
    sel.relation.row_size_bytes = 32'000;
    sel.relation.seed = 1;
    sel.attr_sweep = {8, 64, 250, 1000};
    sel.selectivity_sweep = {0.001, 0.01, 0.05};
    sel.classical_mode = SelectMode::full_scan;
    sel.seed = 42;

    Scenario join;
    join.id = "join-paper";
    join.description =
        "Equijoin of two 31.25M-row relations (1 kB rows): classical hash join vs "
        "hash-partitioned threadlet strategies";
    join.kind = QueryKind::join;
    join.relation.name = "r";
    join.relation.row_count = 31'250'000;
    join.relation.row_size_bytes = 1000;
    join.relation.seed = 2;
    join.relation2.name = "s";
    join.relation2.row_count = 31'250'000;
    join.relation2.row_size_bytes = 1000;
    join.relation2.seed = 3;
    join.attr_sweep = {8, 64, 250, 1000};
    join.selectivity_sweep = {0.01, 1.0};
    join.classical_strategy = JoinStrategy::hash;
    join.mnms_strategies = {MnmsJoinStrategy::migrate_all, MnmsJoinStrategy::index_assisted};
    // Four threadlets per node keep btree probes within a small multiple of
    // the SELECT response.
    join.mnms.threads_per_node = 4;
    join.seed = 43;

    return {sel, join};
}

Scenario find_scenario(const std::string& id) {
    for (Scenario& sc : catalog())
        if (sc.id == id) return sc;
    std::string known;
    for (const Scenario& sc : catalog()) known += " " + sc.id;
    throw config_error("unknown scenario '" + id + "'; catalog has:" + known);
}

Scenario scenario_from_config(const ConfigMap& cfg) {
    Scenario sc;
    auto base = cfg.find("scenario.base");
    if (base != cfg.end()) {
        sc = find_scenario(base->second);
    } else {
        sc.id = "custom";
        sc.relation.name = "r";
        sc.relation.row_count = 100'000;
        sc.relation.row_size_bytes = 100;
        sc.relation2 = sc.relation;
        sc.relation2.name = "s";
        sc.relation2.seed = 1;
        sc.mnms.node_count = 64;
        sc.mnms.ffgt_fanout = 4;
        sc.mnms.ffgt_levels = 3;
    }

    for (const auto& [key, value] : cfg) {
        if (key == "scenario.base") continue;
        if (key == "scenario.id") sc.id = value;
        else if (key == "scenario.kind") {
            if (value == "select") sc.kind = QueryKind::select;
            else if (value == "join") sc.kind = QueryKind::join;
            else throw config_error("scenario.kind '" + value + "': accepted values are select, join");
        }
        else if (key == "scenario.seed") sc.seed = parse_u64(key, value);
        else if (key == "relation.name") sc.relation.name = value;
        else if (key == "relation.rows") sc.relation.row_count = parse_u64(key, value);
        else if (key == "relation.row_bytes")
            sc.relation.row_size_bytes = static_cast<std::uint32_t>(parse_u64(key, value));
        else if (key == "relation.seed") sc.relation.seed = parse_u64(key, value);
        else if (key == "relation2.name") sc.relation2.name = value;
        else if (key == "relation2.rows") sc.relation2.row_count = parse_u64(key, value);
        else if (key == "relation2.row_bytes")
            sc.relation2.row_size_bytes = static_cast<std::uint32_t>(parse_u64(key, value));
        else if (key == "relation2.seed") sc.relation2.seed = parse_u64(key, value);
        else if (key == "sweep.attr_bytes") {
            sc.attr_sweep.clear();
            for (const std::string& tok : split(value, ','))
                sc.attr_sweep.push_back(static_cast<std::uint32_t>(parse_u64(key, tok)));
        }
        else if (key == "sweep.selectivity") {
            sc.selectivity_sweep.clear();
            for (const std::string& tok : split(value, ','))
                sc.selectivity_sweep.push_back(parse_double(key, tok));
        }
        else if (key == "classical.cache_line_bytes")
            sc.classical.cache_line_bytes = static_cast<std::uint32_t>(parse_u64(key, value));
        else if (key == "classical.round_trip_factor")
            sc.classical.round_trip_factor = static_cast<std::uint32_t>(parse_u64(key, value));
        else if (key == "classical.per_row_visit_ns")
            sc.classical.per_row_visit_ns = parse_double(key, value);
        else if (key == "classical.row_ref_bytes")
            sc.classical.row_ref_bytes = static_cast<std::uint32_t>(parse_u64(key, value));
        else if (key == "classical.host_bandwidth_bytes_per_s")
            sc.classical.host_bandwidth_bytes_per_s = parse_double(key, value);
        else if (key == "classical.select_mode") sc.classical_mode = parse_select_mode(value);
        else if (key == "classical.join_strategy")
            sc.classical_strategy = parse_join_strategy(value);
        else if (key == "mnms.node_count")
            sc.mnms.node_count = static_cast<std::uint32_t>(parse_u64(key, value));
        else if (key == "mnms.ffgt_fanout")
            sc.mnms.ffgt_fanout = static_cast<std::uint32_t>(parse_u64(key, value));
        else if (key == "mnms.ffgt_levels")
            sc.mnms.ffgt_levels = static_cast<std::uint32_t>(parse_u64(key, value));
        else if (key == "mnms.threads_per_node")
            sc.mnms.threads_per_node = static_cast<std::uint32_t>(parse_u64(key, value));
        else if (key == "mnms.per_row_scan_ns") sc.mnms.per_row_scan_ns = parse_double(key, value);
        else if (key == "mnms.per_hop_ns") sc.mnms.per_hop_ns = parse_double(key, value);
        else if (key == "mnms.node_mem_bytes") sc.mnms.node_mem_bytes = parse_u64(key, value);
        else if (key == "mnms.row_ref_bytes")
            sc.mnms.row_ref_bytes = static_cast<std::uint32_t>(parse_u64(key, value));
        else if (key == "mnms.summary_bits_per_key")
            sc.mnms.summary_bits_per_key = static_cast<std::uint32_t>(parse_u64(key, value));
        else if (key == "mnms.energy_host")
            sc.mnms.channel_energy_weights.host = parse_double(key, value);
        else if (key == "mnms.energy_fabric")
            sc.mnms.channel_energy_weights.fabric = parse_double(key, value);
        else if (key == "mnms.energy_intra")
            sc.mnms.channel_energy_weights.intra = parse_double(key, value);
        else if (key == "mnms.select_payload") {
            if (value == "full_row") sc.select_payload = ResultPayload::full_row;
            else if (value == "row_ref") sc.select_payload = ResultPayload::row_ref;
            else throw config_error("mnms.select_payload '" + value +
                                    "': accepted values are full_row, row_ref");
        }
        else if (key == "mnms.join_payload") {
            if (value == "pair_refs") sc.join_payload = JoinOutputPayload::pair_refs;
            else if (value == "concatenated_rows")
                sc.join_payload = JoinOutputPayload::concatenated_rows;
            else throw config_error("mnms.join_payload '" + value +
                                    "': accepted values are pair_refs, concatenated_rows");
        }
        else if (key == "mnms.join_strategies") {
            sc.mnms_strategies.clear();
            for (const std::string& tok : split(value, ','))
                sc.mnms_strategies.push_back(parse_mnms_strategy(tok));
        }
        else if (key == "engine.per_row_events") sc.engine.per_row_events = parse_bool(key, value);
        else if (key == "engine.step_budget") sc.engine.step_budget = parse_u64(key, value);
        else
            throw config_error("unknown config key '" + key + "'; accepted keys: " +
                               kAcceptedKeys);
    }
    sc.validate();
    return sc;
}

std::vector<ResultRow> run_scenario(const Scenario& sc) {
    sc.validate();
    std::vector<std::uint32_t> attrs = sc.attr_sweep;
    std::vector<double> sels = sc.selectivity_sweep;
    std::sort(attrs.begin(), attrs.end());
    std::sort(sels.begin(), sels.end());

    std::vector<ResultRow> rows;
    for (std::uint32_t attr_bytes : attrs) {
        for (double sel : sels) {
            if (sc.kind == QueryKind::select) {
                const RelationSpec spec = cell_spec(sc.relation, attr_bytes);
                const SelectivitySpec s = SelectivitySpec::of(sel, spec.row_count);

                ResultRow cls = base_row(sc, attr_bytes, sel);
                cls.architecture = "classical";
                cls.strategy = to_string(sc.classical_mode);
                cls.traffic = classical_select(spec, spec.attributes[0], s, sc.classical_mode,
                                               sc.classical);
                rows.push_back(cls);

                Relation rel = make_relation(spec, s);
                Placement pl = place_rows(rel, sc.mnms.node_count, sc.seed);
                QueryResult qr =
                    mnms_select(planted_select_query(rel, sc.select_payload), pl, sc.mnms,
                                sc.engine);
                ResultRow mn = base_row(sc, attr_bytes, sel);
                mn.architecture = "mnms";
                mn.strategy = "scan";
                mn.traffic = qr.report;
                mn.ratio_vs_classical =
                    static_cast<double>(classical_comparison_traffic(cls.traffic)) /
                    static_cast<double>(mnms_comparison_traffic(sc.kind, mn.traffic));
                rows.push_back(mn);
            } else {
                const RelationSpec spec_r = cell_spec(sc.relation, attr_bytes);
                const RelationSpec spec_s = cell_spec(sc.relation2, attr_bytes);

                ResultRow cls = base_row(sc, attr_bytes, sel);
                cls.architecture = "classical";
                cls.strategy = to_string(sc.classical_strategy);
                cls.traffic = classical_join(spec_r, spec_s, spec_r.attributes[0], sel,
                                             sc.classical_strategy, false, false, sc.classical);
                rows.push_back(cls);

                for (MnmsJoinStrategy strategy : sc.mnms_strategies) {
                    auto [rel_r, rel_s] = make_join_pair(spec_r, spec_s, "key", sel);
                    Placement pl_r = place_rows(rel_r, sc.mnms.node_count, sc.seed);
                    Placement pl_s = place_rows(rel_s, sc.mnms.node_count, sc.seed ^ 0x5353);
                    JoinQuery q;
                    q.relation_r = &rel_r;
                    q.relation_s = &rel_s;
                    q.attribute = "key";
                    q.strategy = strategy;
                    q.output_payload = sc.join_payload;

                    TrafficReport rep;
                    if (strategy == MnmsJoinStrategy::btree)
                        rep = mnms_btree_join(q, pl_r, pl_s, sc.mnms, sc.engine).probe.report;
                    else
                        rep = mnms_hash_join(q, pl_r, pl_s, sc.mnms, sc.engine).report;

                    ResultRow mn = base_row(sc, attr_bytes, sel);
                    mn.architecture = "mnms";
                    mn.strategy = to_string(strategy);
                    mn.traffic = rep;
                    mn.ratio_vs_classical =
                        static_cast<double>(classical_comparison_traffic(cls.traffic)) /
                        static_cast<double>(mnms_comparison_traffic(sc.kind, rep));
                    rows.push_back(mn);
                }
            }
        }
    }
    return rows;
}

const char* const kCsvHeader =
    "scenario,architecture,kind,n_rows,row_bytes,attr_bytes,selectivity,strategy,"
    "host_ram_bytes,intra_node_bytes,fabric_payload_bytes,fabric_link_bytes,response_ms,"
    "match_count,energy_proxy,ratio_vs_classical";

void write_csv(const std::vector<ResultRow>& rows, std::ostream& out) {
    out << kCsvHeader << '\n';
    for (const ResultRow& r : rows) {
        out << r.scenario_id << ',' << r.architecture << ',' << r.kind << ',' << r.n_rows << ','
            << r.row_bytes << ',' << r.attr_bytes << ',' << fmt_double(r.selectivity) << ','
            << r.strategy << ',' << r.traffic.host_ram_bytes << ',' << r.traffic.intra_node_bytes
            << ',' << r.traffic.fabric_payload_bytes << ',' << r.traffic.fabric_link_bytes << ','
            << fmt_double(r.traffic.response_ms) << ',' << r.traffic.match_count << ','
            << fmt_double(r.traffic.energy_proxy) << ','
            << (r.architecture == "classical" ? std::string()
                                              : fmt_double(r.ratio_vs_classical))
            << '\n';
    }
}

std::string csv_string(const std::vector<ResultRow>& rows) {
    std::ostringstream out;
    write_csv(rows, out);
    return out.str();
}

void sweep_to_file(const std::vector<Scenario>& scenarios, const std::string& path) {
    std::vector<ResultRow> rows;
    for (const Scenario& sc : scenarios) {
        std::vector<ResultRow> r = run_scenario(sc);
        rows.insert(rows.end(), r.begin(), r.end());
    }
    std::ofstream out(path);
    if (!out) throw io_error("unwritable output path: " + path);
    write_csv(rows, out);
    if (!out.flush()) throw io_error("write failed: " + path);
}

std::string diff_row_ids(const std::vector<std::uint64_t>& oracle,
                         const std::vector<std::uint64_t>& actual) {
    if (oracle == actual) return {};
    for (std::size_t i = 0; i < std::max(oracle.size(), actual.size()); ++i) {
        const std::string want = i < oracle.size() ? std::to_string(oracle[i]) : "<none>";
        const std::string got = i < actual.size() ? std::to_string(actual[i]) : "<none>";
        if (want != got)
            return "first differing row id at position " + std::to_string(i) + ": oracle " +
                   want + ", simulator " + got;
    }
    return "size mismatch";
}

std::string diff_pairs(const std::vector<std::pair<std::uint64_t, std::uint64_t>>& oracle,
                       const std::vector<std::pair<std::uint64_t, std::uint64_t>>& actual) {
    if (oracle == actual) return {};
    auto show = [](const std::vector<std::pair<std::uint64_t, std::uint64_t>>& v,
                   std::size_t i) {
        return i < v.size() ? "(" + std::to_string(v[i].first) + "," +
                                  std::to_string(v[i].second) + ")"
                            : std::string("<none>");
    };
    for (std::size_t i = 0; i < std::max(oracle.size(), actual.size()); ++i)
        if (show(oracle, i) != show(actual, i))
            return "first differing pair at position " + std::to_string(i) + ": oracle " +
                   show(oracle, i) + ", simulator " + show(actual, i);
    return "size mismatch";
}

namespace {

MnmsConfig desk_config() {
    MnmsConfig cfg;
    cfg.node_count = 64;
    cfg.ffgt_fanout = 4;
    cfg.ffgt_levels = 3;
    return cfg;
}

}  // namespace

VerifyReport verify(std::uint64_t n, const std::vector<std::uint64_t>& seeds, QueryKind kind) {
    VerifyReport report;
    const MnmsConfig cfg = desk_config();
    for (std::uint64_t seed : seeds) {
        VerifySeedResult res;
        res.seed = seed;
        res.passed = true;
        try {
            if (kind == QueryKind::select) {
                RelationSpec spec;
                spec.name = "v";
                spec.row_count = n;
                spec.row_size_bytes = 64;
                spec.attributes = {{"key", 8, true}};
                spec.seed = seed;
                spec.materialized = true;
                Relation rel = make_relation(spec, SelectivitySpec::of(0.03, n));
                Placement pl = place_rows(rel, cfg.node_count, mix64(seed ^ 0x706c));
                QueryResult qr = mnms_select(planted_select_query(rel), pl, cfg);
                auto oracle = reference_select(rel, "key", rel.planted_select_value());
                if (qr.matches != oracle) {
                    res.passed = false;
                    res.detail = diff_row_ids(oracle, qr.matches);
                }
            } else {
                RelationSpec spec_r;
                spec_r.name = "vr";
                spec_r.row_count = n;
                spec_r.row_size_bytes = 64;
                spec_r.attributes = {{"key", 8, true}};
                spec_r.seed = seed;
                spec_r.materialized = true;
                RelationSpec spec_s = spec_r;
                spec_s.name = "vs";
                spec_s.seed = mix64(seed ^ 1);
                auto [rel_r, rel_s] = make_join_pair(spec_r, spec_s, "key", 0.01);
                Placement pl_r = place_rows(rel_r, cfg.node_count, mix64(seed ^ 0x7072));
                Placement pl_s = place_rows(rel_s, cfg.node_count, mix64(seed ^ 0x7073));
                auto oracle = reference_equijoin(rel_r, rel_s, "key");

                JoinQuery q;
                q.relation_r = &rel_r;
                q.relation_s = &rel_s;
                q.attribute = "key";
                for (MnmsJoinStrategy strategy :
                     {MnmsJoinStrategy::migrate_all, MnmsJoinStrategy::index_assisted,
                      MnmsJoinStrategy::btree}) {
                    q.strategy = strategy;
                    std::vector<std::pair<std::uint64_t, std::uint64_t>> pairs;
                    if (strategy == MnmsJoinStrategy::btree)
                        pairs = mnms_btree_join(q, pl_r, pl_s, cfg).probe.pairs;
                    else
                        pairs = mnms_hash_join(q, pl_r, pl_s, cfg).pairs;
                    if (pairs != oracle) {
                        res.passed = false;
                        res.detail = std::string(to_string(strategy)) + ": " +
                                     diff_pairs(oracle, pairs);
                        break;
                    }
                }
            }
        } catch (const error& e) {
            res.passed = false;
            res.detail = e.what();
        }
        report.seeds.push_back(std::move(res));
    }
    report.all_passed = std::all_of(report.seeds.begin(), report.seeds.end(),
                                    [](const VerifySeedResult& r) { return r.passed; });
    return report;
}

void dump_cell_event_log(const Scenario& sc, const std::string& path) {
    Scenario one = sc;
    one.engine.log_events = true;
    const std::uint32_t attr_bytes = one.attr_sweep.front();
    const double sel = one.selectivity_sweep.front();
    if (one.kind == QueryKind::select) {
        const RelationSpec spec = cell_spec(one.relation, attr_bytes);
        Relation rel = make_relation(spec, SelectivitySpec::of(sel, spec.row_count));
        Placement pl = place_rows(rel, one.mnms.node_count, one.seed);
        QueryResult qr =
            mnms_select(planted_select_query(rel, one.select_payload), pl, one.mnms, one.engine);
        write_event_log(qr.log, path);
    } else {
        auto [rel_r, rel_s] = make_join_pair(cell_spec(one.relation, attr_bytes),
                                             cell_spec(one.relation2, attr_bytes), "key", sel);
        Placement pl_r = place_rows(rel_r, one.mnms.node_count, one.seed);
        Placement pl_s = place_rows(rel_s, one.mnms.node_count, one.seed ^ 0x5353);
        JoinQuery q;
        q.relation_r = &rel_r;
        q.relation_s = &rel_s;
        q.attribute = "key";
        q.strategy = one.mnms_strategies.front();
        q.output_payload = one.join_payload;
        if (q.strategy == MnmsJoinStrategy::btree) {
            BtreeSession session = mnms_btree_build(q, pl_r, pl_s, one.mnms, one.engine);
            QueryResult qr = mnms_btree_probe(session);
            write_event_log(qr.log, path);
        } else {
            QueryResult qr = mnms_hash_join(q, pl_r, pl_s, one.mnms, one.engine);
            write_event_log(qr.log, path);
        }
    }
}

std::vector<ResultRow> parse_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw parse_error("CSV line 1: missing header");
    if (line != kCsvHeader) throw parse_error("CSV line 1: unexpected header '" + line + "'");
    std::vector<ResultRow> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::vector<std::string> f = split(line, ',');
        if (f.size() != 16)
            throw parse_error("CSV line " + std::to_string(line_no) + ": expected 16 fields, got " +
                              std::to_string(f.size()));
        try {
            ResultRow r;
            r.scenario_id = f[0];
            r.architecture = f[1];
            r.kind = f[2];
            r.n_rows = std::stoull(f[3]);
            r.row_bytes = static_cast<std::uint32_t>(std::stoul(f[4]));
            r.attr_bytes = static_cast<std::uint32_t>(std::stoul(f[5]));
            r.selectivity = std::stod(f[6]);
            r.strategy = f[7];
            r.traffic.host_ram_bytes = std::stoull(f[8]);
            r.traffic.intra_node_bytes = std::stoull(f[9]);
            r.traffic.fabric_payload_bytes = std::stoull(f[10]);
            r.traffic.fabric_link_bytes = std::stoull(f[11]);
            r.traffic.response_ms = std::stod(f[12]);
            r.traffic.match_count = std::stoull(f[13]);
            r.traffic.energy_proxy = std::stod(f[14]);
            r.ratio_vs_classical = f[15].empty() ? 0.0 : std::stod(f[15]);
            rows.push_back(std::move(r));
        } catch (const std::exception&) {
            throw parse_error("CSV line " + std::to_string(line_no) + ": malformed field");
        }
    }
    return rows;
}

ReportOutput report_csv(const std::string& csv_path, const std::string& out_dir) {
    std::ifstream in(csv_path);
    if (!in) throw io_error("cannot read CSV: " + csv_path);
    const std::vector<ResultRow> rows = parse_csv(in);

    ReportOutput out;
    std::ostringstream table;
    if (rows.empty()) {
        out.table = "";
        return out;
    }
    std::filesystem::create_directories(out_dir);

    // classical response per (scenario, attr, sel) for the speedup column
    std::map<std::string, double> classical_response;
    std::map<std::string, std::uint64_t> classical_bytes;
    auto cell_key = [](const ResultRow& r) {
        return r.scenario_id + "|" + std::to_string(r.attr_bytes) + "|" +
               fmt_double(r.selectivity);
    };
    for (const ResultRow& r : rows)
        if (r.architecture == "classical") {
            classical_response[cell_key(r)] = r.traffic.response_ms;
            classical_bytes[cell_key(r)] = r.traffic.host_ram_bytes;
        }

    std::string current_scenario;
    for (const ResultRow& r : rows) {
        if (r.scenario_id != current_scenario) {
            current_scenario = r.scenario_id;
            table << "\n== scenario " << r.scenario_id << " (" << r.kind << ") ==\n";
            table << "comparison traffic: classical host<->RAM bytes vs MNMS "
                  << (r.kind == "select" ? "intra-node + fabric payload bytes"
                                         : "fabric payload bytes")
                  << "; MB = 10^6 bytes\n";
            table << "arch       strategy        attr_B  selectivity  traffic_MB      "
                     "response_ms     ratio     speedup\n";
        }
        const QueryKind kind = r.kind == "select" ? QueryKind::select : QueryKind::join;
        const std::uint64_t traffic = r.architecture == "classical"
                                          ? classical_comparison_traffic(r.traffic)
                                          : mnms_comparison_traffic(kind, r.traffic);
        char buf[256];
        std::string speedup = "-";
        std::string ratio = "-";
        if (r.architecture == "mnms") {
            auto it = classical_response.find(cell_key(r));
            if (it != classical_response.end() && r.traffic.response_ms > 0)
                speedup = fmt_fixed(it->second / r.traffic.response_ms, 0);
            ratio = fmt_fixed(r.ratio_vs_classical, 1);
        }
        std::snprintf(buf, sizeof buf, "%-10s %-15s %6u  %-11s  %-14s  %-14s  %-8s  %s\n",
                      r.architecture.c_str(), r.strategy.c_str(), r.attr_bytes,
                      fmt_double(r.selectivity).c_str(),
                      fmt_fixed(static_cast<double>(traffic) / 1e6, 3).c_str(),
                      fmt_double(r.traffic.response_ms).c_str(), ratio.c_str(), speedup.c_str());
        table << buf;
    }

    // Plot series: traffic vs attribute at fixed selectivity, and traffic
    // vs selectivity at fixed attribute, one file per series.
    auto series_label = [](const ResultRow& r) {
        std::string label = r.scenario_id + "_" + r.architecture;
        if (r.architecture == "mnms" || r.kind == "join") label += "_" + r.strategy;
        return label;
    };
    std::map<std::string, std::map<std::uint64_t, std::vector<std::pair<double, double>>>>
        attr_series;  // label -> sel-key -> (attr, traffic)
    std::map<std::string, std::map<std::uint64_t, std::vector<std::pair<double, double>>>>
        sel_series;
    for (const ResultRow& r : rows) {
        const QueryKind kind = r.kind == "select" ? QueryKind::select : QueryKind::join;
        const std::uint64_t traffic = r.architecture == "classical"
                                          ? classical_comparison_traffic(r.traffic)
                                          : mnms_comparison_traffic(kind, r.traffic);
        const std::string label = series_label(r);
        std::uint64_t sel_bits;
        static_assert(sizeof(double) == sizeof(std::uint64_t));
        std::memcpy(&sel_bits, &r.selectivity, sizeof sel_bits);
        attr_series[label][sel_bits].push_back(
            {static_cast<double>(r.attr_bytes), static_cast<double>(traffic)});
        sel_series[label][r.attr_bytes].push_back(
            {r.selectivity, static_cast<double>(traffic)});
    }
    auto dump_series = [&](const auto& series, const std::string& x_name,
                           const std::string& fixed_name, bool fixed_is_sel) {
        for (const auto& [label, by_fixed] : series) {
            for (const auto& [fixed_key, points] : by_fixed) {
                std::string fixed_str;
                if (fixed_is_sel) {
                    double sel;
                    std::uint64_t bits = fixed_key;
                    std::memcpy(&sel, &bits, sizeof sel);
                    fixed_str = fmt_double(sel);
                } else {
                    fixed_str = std::to_string(fixed_key);
                }
                const std::string path = out_dir + "/" + label + "_" + fixed_name + fixed_str +
                                         "_traffic_vs_" + x_name + ".dat";
                std::ofstream f(path);
                if (!f) throw io_error("cannot write plot data: " + path);
                f << "# " << x_name << " traffic_bytes\n";
                auto sorted = points;
                std::sort(sorted.begin(), sorted.end());
                for (const auto& [x, y] : sorted) f << fmt_double(x) << ' ' << fmt_double(y) << '\n';
                out.plot_files.push_back(path);
            }
        }
    };
    dump_series(attr_series, "attr", "sel", true);
    dump_series(sel_series, "sel", "attr", false);

    out.table = table.str();
    return out;
}

}  // namespace mnms
