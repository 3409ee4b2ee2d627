#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <queue>
#include <string>
#include <unordered_map>
#include <vector>

#include "mnms/fabric.hpp"
#include "mnms/relation.hpp"
#include "mnms/report.hpp"

namespace mnms {

// Simulation time in integer picoseconds. Integer time keeps event order,
// batched-vs-per-row equivalence, and event-log re-summation exact.
using picos = std::int64_t;

picos to_picos(double ns);

enum class Opcode : std::uint8_t {
    scan_compare,   // scan local rows of a relation, collect matches
    scan_route,     // scan local rows, migrate digests to hash owners
    migrate,        // relocate this threadlet
    spawn,          // spawn one child threadlet
    spawn_all,      // spawn one child per node
    emit,           // send result payload toward a collector node
    hash_put,       // insert carried digest into the local hash partition
    hash_probe,     // probe local hash partition with carried digest
    btree_find,     // probe local ordered index with carried digest
    hash_put_batch,
    hash_probe_batch,
    btree_build_batch,
    btree_find_batch,
    summary_match_batch,
    halt,
};

const char* opcode_name(Opcode op);

struct ScanCompareArgs {
    std::uint32_t relation = 0;            // registered RelationContext id
    std::vector<std::uint8_t> value;       // empty on metadata-only runs
};

struct ScanRouteArgs {
    std::uint32_t relation = 0;
    std::uint64_t digest_bytes = 16;  // priced size of one routed digest
    std::uint32_t fp_bits = 0;        // >0: price fp bits per key instead
    std::uint32_t phase = 0;          // inbox tag at the owner
};

struct MigrateArgs {
    std::uint32_t dst = 0;
};

struct SpawnArgs {
    std::uint32_t program = 0;
    std::uint32_t dst = 0;
    std::uint64_t child_state_bytes = 32;
};

struct SpawnAllArgs {
    std::uint32_t program = 0;
    std::uint64_t child_state_bytes = 32;
};

struct EmitArgs {
    std::uint32_t dst = 0;
    std::uint64_t fixed_bytes = 0;
    std::uint64_t per_match_bytes = 0;     // scaled by the threadlet accumulator
};

struct BatchArgs {
    std::uint32_t phase = 0;
    std::uint64_t digest_bytes = 16;
    std::uint64_t entry_bytes = 16;        // per-visit index entry (btree)
    std::uint64_t planted_matches = 0;     // metadata-mode matches at this node
    std::uint32_t summary_phase_s = 0;     // summary_match_batch: probe-side tag
    std::uint64_t fetch_seed = 0;          // summary_match_batch: digest-fetch apportionment
};

struct Instruction {
    Opcode op = Opcode::halt;
    ScanCompareArgs scan;
    ScanRouteArgs route;
    MigrateArgs migrate;
    SpawnArgs spawn;
    SpawnAllArgs spawn_all;
    EmitArgs emit;
    BatchArgs batch;
};

enum class ThreadletStatus : std::uint8_t { runnable, migrating, done };

// A migratory unit of execution: a program, a little register state, and
// a current node. state_bytes is what a migration or remote spawn costs.
struct Threadlet {
    std::uint64_t id = 0;
    std::uint32_t program = 0;
    std::uint32_t pc = 0;
    std::uint32_t node = 0;
    std::uint64_t state_bytes = 32;
    ThreadletStatus status = ThreadletStatus::runnable;
    std::uint64_t accumulator = 0;         // matches found by the last scan/probe
    std::uint64_t rows_done = 0;           // per-row mode progress
    std::string carry_key;                 // digest carried by single-item ops
    std::uint64_t carry_ref = 0;
};

// Rows of one relation as seen by the engine: per-node residency counts,
// plus row ids and byte access when the relation is materialized.
struct RelationContext {
    std::uint32_t attr_width = 8;
    std::uint32_t attr_index = 0;
    std::uint64_t total_rows = 0;
    std::vector<std::uint64_t> node_rows;
    std::vector<std::uint64_t> node_matches;               // metadata select planting
    const Relation* rel = nullptr;                         // set when materialized
    std::vector<std::vector<std::uint64_t>> node_row_ids;  // set when materialized
};

struct EngineOptions {
    bool per_row_events = false;   // force one event per scanned row
    bool log_events = false;
    std::uint64_t step_budget = 1'000'000'000;
};

struct EventLogLine {
    picos time = 0;
    std::uint32_t node = 0;
    std::uint64_t threadlet = 0;
    Opcode op = Opcode::halt;
    std::uint64_t bytes_intra = 0;
    std::uint64_t bytes_fabric_payload = 0;
    std::uint64_t bytes_fabric_link = 0;
};

// One line per event: time_ns,node,threadlet,opcode,bytes_intra,
// bytes_fabric_payload,bytes_fabric_link. Times are exact to the picosecond.
void write_event_log(const std::vector<EventLogLine>& log, std::ostream& out);
void write_event_log(const std::vector<EventLogLine>& log, const std::string& path);

struct EngineReport {
    TrafficReport traffic;
    std::uint64_t spawned = 0;
    std::uint64_t retired = 0;
    std::uint64_t live = 0;
    std::uint64_t events_processed = 0;
    picos completion_ps = 0;
    std::vector<picos> node_busy_ps;
    std::uint32_t max_concurrent = 0;      // highest observed per-node occupancy
};

// Completion and delivery horizon of one run_to_completion call; queries
// use max_arrival_ps as the barrier before spawning the next phase.
struct StageStats {
    picos max_completion_ps = 0;
    picos max_arrival_ps = 0;
};

// Deterministic single-threaded discrete-event executor for threadlets.
// Events are totally ordered by (time, node, threadlet id, seq); repeated
// runs over identical inputs are bit-identical.
class Engine {
  public:
    Engine(MnmsConfig cfg, EngineOptions opts, std::uint64_t partition_seed);

    std::uint32_t register_program(std::vector<Instruction> prog);
    std::uint32_t add_relation(RelationContext ctx);

    // External injection; costs no fabric traffic.
    std::uint64_t spawn(std::uint32_t program, std::uint32_t node, picos at,
                        std::uint64_t state_bytes = 32, std::string carry_key = {},
                        std::uint64_t carry_ref = 0);

    StageStats run_to_completion();

    // Owner node of a key under the hash partitioning.
    std::uint32_t owner_of(const std::string& key) const;

    // Per-owner inbox counts for a phase (finalizes pending bulk routing).
    std::vector<std::uint64_t> inbox_counts(std::uint32_t phase);

    // Metadata runs: per-node match counts a probe phase should report.
    void set_planted_matches(std::uint32_t phase, std::vector<std::uint64_t> per_node);

    const EngineReport& report();
    const std::vector<EventLogLine>& event_log() const { return log_; }
    void dump_event_log(const std::string& path) const;

    // Results gathered on materialized runs.
    std::vector<std::uint64_t> take_select_matches();
    std::vector<std::pair<std::uint64_t, std::uint64_t>> take_join_pairs();

    const MnmsConfig& config() const { return cfg_; }
    const FabricTopology& topology() const { return topo_; }
    picos scan_ps() const { return scan_ps_; }
    picos hop_ps() const { return hop_ps_; }

  private:
    struct Digest {
        std::string key;
        std::uint64_t ref = 0;
        std::uint32_t home = 0;
    };

    struct Inbox {
        std::uint64_t count = 0;
        std::vector<Digest> items;
    };

    struct NodeState {
        std::vector<picos> lane_free;
        picos busy_ps = 0;
        std::unordered_map<std::string, std::vector<std::uint64_t>> hash_refs;
        std::uint64_t hash_count = 0;
        std::uint64_t hash_bytes = 0;
        std::map<std::string, std::vector<std::uint64_t>> btree_refs;
        std::uint64_t btree_count = 0;
        std::unordered_map<std::uint32_t, Inbox> inbox;
    };

    // Bulk routing accumulated as a difference array; counts materialize
    // lazily in inbox_counts().
    struct PendingRoute {
        std::uint64_t base = 0;                 // every node receives this many
        std::vector<std::int64_t> window_diff;  // +1 windows of the remainders
        bool dirty = false;
    };

    struct Event {
        picos time;
        std::uint32_t node;
        std::uint64_t threadlet;
        std::uint64_t seq;
        bool operator>(const Event& o) const {
            if (time != o.time) return time > o.time;
            if (node != o.node) return node > o.node;
            if (threadlet != o.threadlet) return threadlet > o.threadlet;
            return seq > o.seq;
        }
    };

    void schedule(picos t, std::uint32_t node, std::uint64_t threadlet);
    void execute(const Event& ev);
    picos occupy_lane(std::uint32_t node, picos earliest, picos duration);
    void account_fabric(std::uint32_t src, std::uint32_t dst, std::uint64_t bytes);
    void log_line(picos t, std::uint32_t node, std::uint64_t tl, Opcode op, std::uint64_t intra,
                  std::uint64_t payload, std::uint64_t link);
    void note_arrival(picos t) {
        if (t > stage_arrival_max_) stage_arrival_max_ = t;
    }
    void note_completion(picos t) {
        if (t > max_completion_) max_completion_ = t;
    }
    std::uint64_t fp_bytes(std::uint64_t keys, std::uint32_t fp_bits) const {
        return (keys * fp_bits + 7) / 8;
    }

    // Instruction handlers; each returns the completion time of the event.
    picos do_scan_compare(const Event& ev, Threadlet& tl, const Instruction& ins);
    picos do_scan_route(const Event& ev, Threadlet& tl, const Instruction& ins);
    picos do_batch(const Event& ev, Threadlet& tl, const Instruction& ins);
    picos do_single_digest(const Event& ev, Threadlet& tl, const Instruction& ins);

    MnmsConfig cfg_;
    EngineOptions opts_;
    FabricTopology topo_;
    std::uint64_t partition_seed_;
    picos scan_ps_;
    picos hop_ps_;

    std::vector<std::vector<Instruction>> programs_;
    std::vector<RelationContext> relations_;
    std::vector<NodeState> nodes_;
    // deque: spawn handlers append while references to the parent are live
    std::deque<Threadlet> threadlets_;
    std::unordered_map<std::uint32_t, PendingRoute> pending_routes_;
    std::unordered_map<std::uint32_t, std::vector<std::uint64_t>> planted_;

    std::priority_queue<Event, std::vector<Event>, std::greater<Event>> queue_;
    std::uint64_t seq_ = 0;
    std::uint64_t events_processed_ = 0;
    picos max_completion_ = 0;
    picos stage_arrival_max_ = 0;
    std::uint32_t max_concurrent_ = 0;

    TrafficReport traffic_;
    std::uint64_t spawned_ = 0;
    std::uint64_t retired_ = 0;
    EngineReport report_;

    std::vector<EventLogLine> log_;
    std::vector<std::uint64_t> select_matches_;
    std::vector<std::pair<std::uint64_t, std::uint64_t>> join_pairs_;
};

// Splits `total` across receivers proportionally to their capacities,
// exactly and deterministically; entry i never exceeds capacities[i].
std::vector<std::uint64_t> apportion(std::uint64_t total,
                                     const std::vector<std::uint64_t>& capacities,
                                     std::uint64_t seed);

}  // namespace mnms
