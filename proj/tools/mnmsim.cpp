// mnmsim: compare a classical cache-based server against a migratory
// near-memory server on SELECT and JOIN workloads.
//
//   mnmsim catalog
//   mnmsim run --scenario select-paper [--out rows.csv] [--event-log ev.csv]
//   mnmsim sweep --out sweep.csv [--scenarios select-paper,join-paper]
//   mnmsim verify --kind all [--n 10000] [--seed-count 10]
//   mnmsim report --csv sweep.csv --out plots/

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mnms/errors.hpp"
#include "mnms/harness.hpp"

namespace {

mnms::Scenario load_scenario(const std::string& scenario_id, const std::string& config_path,
                             std::uint64_t seed_override, bool seed_set) {
    mnms::ConfigMap cfg;
    if (!config_path.empty()) cfg = mnms::parse_config_file(config_path);
    if (!scenario_id.empty()) cfg["scenario.base"] = scenario_id;
    if (cfg.empty()) throw mnms::config_error("run needs --scenario or --config");
    mnms::Scenario sc = mnms::scenario_from_config(cfg);
    if (seed_set) sc.seed = seed_override;
    return sc;
}

void print_rows(const std::vector<mnms::ResultRow>& rows) {
    std::printf("%-10s %-15s %6s %-11s %16s %16s %16s %14s %12s %10s\n", "arch", "strategy",
                "attr_B", "selectivity", "host_ram_B", "intra_B", "fabric_payload_B",
                "response_ms", "matches", "ratio");
    for (const auto& r : rows) {
        char ratio[32] = "-";
        if (r.architecture != "classical")
            std::snprintf(ratio, sizeof ratio, "%.1f", r.ratio_vs_classical);
        std::printf("%-10s %-15s %6u %-11g %16llu %16llu %16llu %14.6f %12llu %10s\n",
                    r.architecture.c_str(), r.strategy.c_str(), r.attr_bytes, r.selectivity,
                    static_cast<unsigned long long>(r.traffic.host_ram_bytes),
                    static_cast<unsigned long long>(r.traffic.intra_node_bytes),
                    static_cast<unsigned long long>(r.traffic.fabric_payload_bytes),
                    r.traffic.response_ms,
                    static_cast<unsigned long long>(r.traffic.match_count), ratio);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"classical vs migratory near-memory query cost simulator"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    app.add_option("--config", config_path, "flat key=value config file")->type_name("FILE");
    app.add_option_function<std::uint64_t>(
           "--seed", [&](std::uint64_t v) { seed = v; seed_set = true; },
           "override the scenario seed");

    auto* cat = app.add_subcommand("catalog", "list built-in scenarios");

    auto* run = app.add_subcommand("run", "run one scenario and print its result rows");
    std::string run_scenario_id, run_out, run_event_log;
    run->add_option("--scenario", run_scenario_id, "catalog scenario id");
    run->add_option("--out", run_out, "also write rows as CSV")->type_name("FILE");
    run->add_option("--event-log", run_event_log,
                    "dump the MNMS event log of the last sweep cell")
        ->type_name("FILE");

    auto* sweep = app.add_subcommand("sweep", "run scenarios and write one CSV");
    std::string sweep_out = "sweep.csv", sweep_ids;
    sweep->add_option("--out", sweep_out, "output CSV path")->type_name("FILE");
    sweep->add_option("--scenarios", sweep_ids, "comma-separated ids (default: whole catalog)");

    auto* verify = app.add_subcommand("verify", "check MNMS results against the brute-force oracle");
    std::uint64_t verify_n = 10'000, verify_seed_count = 10;
    std::string verify_kind = "all", verify_seeds;
    verify->add_option("--n", verify_n, "rows per relation");
    verify->add_option("--kind", verify_kind, "select | join | all");
    verify->add_option("--seed-count", verify_seed_count, "number of consecutive seeds");
    verify->add_option("--seeds", verify_seeds, "explicit comma-separated seeds");

    auto* report = app.add_subcommand("report", "comparison table and plot data from a sweep CSV");
    std::string report_csv_path, report_out = "report";
    report->add_option("--csv", report_csv_path, "sweep CSV")->required();
    report->add_option("--out", report_out, "directory for plot-data files");

    CLI11_PARSE(app, argc, argv);

    try {
        if (cat->parsed()) {
            for (const mnms::Scenario& sc : mnms::catalog())
                std::printf("%-14s %s\n", sc.id.c_str(), sc.description.c_str());
            return 0;
        }

        if (run->parsed()) {
            mnms::Scenario sc = load_scenario(run_scenario_id, config_path, seed, seed_set);
            if (!run_event_log.empty()) sc.engine.log_events = true;
            std::vector<mnms::ResultRow> rows = mnms::run_scenario(sc);
            std::printf("scenario %s (%s)\n", sc.id.c_str(), sc.description.c_str());
            print_rows(rows);
            if (!run_out.empty()) {
                std::ofstream out(run_out);
                if (!out) throw mnms::io_error("unwritable output path: " + run_out);
                mnms::write_csv(rows, out);
                std::printf("wrote %s\n", run_out.c_str());
            }
            if (!run_event_log.empty()) {
                // Re-run the last MNMS cell with logging and dump it.
                mnms::Scenario one = sc;
                one.attr_sweep = {sc.attr_sweep.back()};
                one.selectivity_sweep = {sc.selectivity_sweep.back()};
                mnms::dump_cell_event_log(one, run_event_log);
                std::printf("wrote %s\n", run_event_log.c_str());
            }
            return 0;
        }

        if (sweep->parsed()) {
            std::vector<mnms::Scenario> scenarios;
            if (sweep_ids.empty()) {
                scenarios = mnms::catalog();
            } else {
                std::size_t start = 0;
                while (start <= sweep_ids.size()) {
                    std::size_t pos = sweep_ids.find(',', start);
                    std::string id = sweep_ids.substr(
                        start, pos == std::string::npos ? std::string::npos : pos - start);
                    if (!id.empty()) scenarios.push_back(mnms::find_scenario(id));
                    if (pos == std::string::npos) break;
                    start = pos + 1;
                }
            }
            if (!config_path.empty()) {
                mnms::ConfigMap cfg = mnms::parse_config_file(config_path);
                for (mnms::Scenario& sc : scenarios) {
                    mnms::ConfigMap with_base = cfg;
                    with_base["scenario.base"] = sc.id;
                    sc = mnms::scenario_from_config(with_base);
                }
            }
            if (seed_set)
                for (mnms::Scenario& sc : scenarios) sc.seed = seed;
            mnms::sweep_to_file(scenarios, sweep_out);
            std::printf("wrote %s\n", sweep_out.c_str());
            return 0;
        }

        if (verify->parsed()) {
            std::vector<std::uint64_t> seeds;
            if (!verify_seeds.empty()) {
                std::size_t start = 0;
                while (start <= verify_seeds.size()) {
                    std::size_t pos = verify_seeds.find(',', start);
                    std::string tok = verify_seeds.substr(
                        start, pos == std::string::npos ? std::string::npos : pos - start);
                    if (!tok.empty()) seeds.push_back(std::stoull(tok));
                    if (pos == std::string::npos) break;
                    start = pos + 1;
                }
            } else {
                for (std::uint64_t i = 0; i < verify_seed_count; ++i)
                    seeds.push_back((seed_set ? seed : 1) + i);
            }
            bool ok = true;
            auto run_kind = [&](mnms::QueryKind kind) {
                mnms::VerifyReport rep = mnms::verify(verify_n, seeds, kind);
                int passed = 0;
                for (const auto& s : rep.seeds) {
                    if (s.passed) {
                        ++passed;
                    } else {
                        std::printf("FAIL %s seed %llu: %s\n", mnms::to_string(kind),
                                    static_cast<unsigned long long>(s.seed), s.detail.c_str());
                    }
                }
                std::printf("%s: %d/%zu seeds passed\n", mnms::to_string(kind), passed,
                            rep.seeds.size());
                ok = ok && rep.all_passed;
            };
            if (verify_kind == "select" || verify_kind == "all") run_kind(mnms::QueryKind::select);
            if (verify_kind == "join" || verify_kind == "all") run_kind(mnms::QueryKind::join);
            if (verify_kind != "select" && verify_kind != "join" && verify_kind != "all")
                throw mnms::config_error("--kind accepts select, join, all");
            return ok ? 0 : 1;
        }

        if (report->parsed()) {
            mnms::ReportOutput out = mnms::report_csv(report_csv_path, report_out);
            std::fputs(out.table.c_str(), stdout);
            for (const std::string& f : out.plot_files) std::printf("wrote %s\n", f.c_str());
            return 0;
        }
    } catch (const mnms::error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
