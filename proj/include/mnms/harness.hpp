#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mnms/baseline.hpp"
#include "mnms/config.hpp"
#include "mnms/queries.hpp"

namespace mnms {

enum class QueryKind { select, join };

// One sweepable experiment: the machine calibrations plus the attribute
// and selectivity grids. The relation fields are templates; per cell the
// key attribute is instantiated at the swept width.
struct Scenario {
    std::string id;
    std::string description;
    QueryKind kind = QueryKind::select;
    RelationSpec relation;      // R side
    RelationSpec relation2;     // S side (join)
    std::vector<std::uint32_t> attr_sweep = {8};
    std::vector<double> selectivity_sweep = {0.05};
    SelectMode classical_mode = SelectMode::full_scan;
    JoinStrategy classical_strategy = JoinStrategy::hash;
    std::vector<MnmsJoinStrategy> mnms_strategies = {MnmsJoinStrategy::migrate_all};
    ResultPayload select_payload = ResultPayload::full_row;
    JoinOutputPayload join_payload = JoinOutputPayload::pair_refs;
    ClassicalConfig classical;
    MnmsConfig mnms;
    EngineOptions engine;
    std::uint64_t seed = 42;

    void validate() const;
};

struct ResultRow {
    std::string scenario_id;
    std::string architecture;   // classical | mnms
    std::string kind;           // select | join
    std::uint64_t n_rows = 0;
    std::uint32_t row_bytes = 0;
    std::uint32_t attr_bytes = 0;
    double selectivity = 0.0;
    std::string strategy;       // select mode or join strategy
    TrafficReport traffic;
    double ratio_vs_classical = 0.0;  // comparison traffic; blank on classical rows
};

// Comparison traffic behind the ratio column and the band checks:
// classical side is host_ram_bytes; the MNMS side counts intra-node plus
// fabric payload for SELECT and fabric payload for JOIN (data the fabric
// actually moves; in-place scans stay inside the memory node).
std::uint64_t classical_comparison_traffic(const TrafficReport& t);
std::uint64_t mnms_comparison_traffic(QueryKind kind, const TrafficReport& t);

// Built-in scenarios: select-paper, join-paper.
std::vector<Scenario> catalog();
Scenario find_scenario(const std::string& id);

// Applies flat config keys over a base scenario (scenario.base names a
// catalog entry). Unknown keys raise config_error naming the key and the
// accepted set.
Scenario scenario_from_config(const ConfigMap& cfg);

// Full cross product of the sweeps, both architectures, deterministic row
// order: attribute ascending, selectivity ascending, classical before mnms.
std::vector<ResultRow> run_scenario(const Scenario& sc);

extern const char* const kCsvHeader;
void write_csv(const std::vector<ResultRow>& rows, std::ostream& out);
std::string csv_string(const std::vector<ResultRow>& rows);
void sweep_to_file(const std::vector<Scenario>& scenarios, const std::string& path);

// Oracle gate: for each seed, materialize desk-scale relations, run every
// MNMS execution path, and compare result sets to the brute-force oracle.
struct VerifySeedResult {
    std::uint64_t seed = 0;
    bool passed = false;
    std::string detail;   // first mismatch, when failed
};

struct VerifyReport {
    std::vector<VerifySeedResult> seeds;
    bool all_passed = false;
};

VerifyReport verify(std::uint64_t n, const std::vector<std::uint64_t>& seeds, QueryKind kind);

// First difference between sorted oracle and simulator result sets, as the
// verify verb reports it; empty string when the sets are equal.
std::string diff_row_ids(const std::vector<std::uint64_t>& oracle,
                         const std::vector<std::uint64_t>& actual);
std::string diff_pairs(const std::vector<std::pair<std::uint64_t, std::uint64_t>>& oracle,
                       const std::vector<std::pair<std::uint64_t, std::uint64_t>>& actual);

// Comparison tables and two-column plot-data series from a sweep CSV.
struct ReportOutput {
    std::string table;                    // human-readable comparison table
    std::vector<std::string> plot_files;  // files written under out_dir
};

std::vector<ResultRow> parse_csv(std::istream& in);
ReportOutput report_csv(const std::string& csv_path, const std::string& out_dir);

// Runs the MNMS side of the scenario's first sweep cell with event logging
// enabled and writes the log (audit / re-summation workflow).
void dump_cell_event_log(const Scenario& sc, const std::string& path);

const char* to_string(QueryKind k);
const char* to_string(SelectMode m);
const char* to_string(JoinStrategy s);
const char* to_string(MnmsJoinStrategy s);

}  // namespace mnms
