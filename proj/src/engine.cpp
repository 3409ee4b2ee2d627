#include "mnms/engine.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "mnms/errors.hpp"
#include "mnms/rng.hpp"

namespace mnms {

namespace {

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::uint64_t ceil_log2(std::uint64_t x) {
    return x <= 1 ? 0 : std::bit_width(x - 1);
}

picos ceil_div_ps(picos total, std::uint64_t parts) {
    return parts <= 1 ? total : (total + static_cast<picos>(parts) - 1) / static_cast<picos>(parts);
}

}  // namespace

picos to_picos(double ns) { return static_cast<picos>(std::llround(ns * 1000.0)); }

const char* opcode_name(Opcode op) {
    switch (op) {
        case Opcode::scan_compare: return "SCAN_COMPARE";
        case Opcode::scan_route: return "SCAN_ROUTE";
        case Opcode::migrate: return "MIGRATE";
        case Opcode::spawn: return "SPAWN";
        case Opcode::spawn_all: return "SPAWN";
        case Opcode::emit: return "EMIT";
        case Opcode::hash_put: return "HASH_PUT";
        case Opcode::hash_probe: return "HASH_PROBE";
        case Opcode::btree_find: return "BTREE_FIND";
        case Opcode::hash_put_batch: return "HASH_PUT";
        case Opcode::hash_probe_batch: return "HASH_PROBE";
        case Opcode::btree_build_batch: return "BTREE_BUILD";
        case Opcode::btree_find_batch: return "BTREE_FIND";
        case Opcode::summary_match_batch: return "SUMMARY_MATCH";
        case Opcode::halt: return "HALT";
    }
    return "?";
}

std::vector<std::uint64_t> apportion(std::uint64_t total,
                                     const std::vector<std::uint64_t>& capacities,
                                     std::uint64_t seed) {
    const std::size_t n = capacities.size();
    std::vector<std::uint64_t> out(n, 0);
    if (n == 0 || total == 0) {
        if (total > 0) throw engine_error("apportion: no capacity");
        return out;
    }
    std::uint64_t cap_sum = 0;
    for (std::uint64_t c : capacities) cap_sum += c;
    if (total > cap_sum) throw engine_error("apportion: total exceeds capacity");

    std::uint64_t assigned = 0;
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(total) * capacities[i]) / cap_sum);
        assigned += out[i];
    }
    // Remainders go one apiece starting from a seeded offset, skipping
    // receivers already at capacity.
    std::uint64_t left = total - assigned;
    std::size_t i = static_cast<std::size_t>(mix64(seed) % n);
    while (left > 0) {
        if (out[i] < capacities[i]) {
            ++out[i];
            --left;
        }
        i = (i + 1) % n;
    }
    return out;
}

Engine::Engine(MnmsConfig cfg, EngineOptions opts, std::uint64_t partition_seed)
    : cfg_(std::move(cfg)),
      opts_(opts),
      topo_(cfg_.topology()),
      partition_seed_(partition_seed),
      scan_ps_(to_picos(cfg_.per_row_scan_ns)),
      hop_ps_(to_picos(cfg_.per_hop_ns)) {
    cfg_.validate();
    nodes_.resize(cfg_.node_count);
    for (auto& n : nodes_) n.lane_free.assign(cfg_.threads_per_node, 0);
}

std::uint32_t Engine::register_program(std::vector<Instruction> prog) {
    programs_.push_back(std::move(prog));
    return static_cast<std::uint32_t>(programs_.size() - 1);
}

std::uint32_t Engine::add_relation(RelationContext ctx) {
    if (ctx.node_rows.size() != cfg_.node_count)
        throw engine_error("relation context does not cover every node");
    relations_.push_back(std::move(ctx));
    return static_cast<std::uint32_t>(relations_.size() - 1);
}

std::uint64_t Engine::spawn(std::uint32_t program, std::uint32_t node, picos at,
                            std::uint64_t state_bytes, std::string carry_key,
                            std::uint64_t carry_ref) {
    if (node >= cfg_.node_count)
        throw topology_error("spawn target node " + std::to_string(node) + " out of range");
    if (program >= programs_.size()) throw engine_error("unknown program");
    Threadlet tl;
    tl.id = threadlets_.size();
    tl.program = program;
    tl.node = node;
    tl.state_bytes = state_bytes;
    tl.carry_key = std::move(carry_key);
    tl.carry_ref = carry_ref;
    threadlets_.push_back(std::move(tl));
    ++spawned_;
    schedule(at, node, threadlets_.back().id);
    return threadlets_.back().id;
}

void Engine::schedule(picos t, std::uint32_t node, std::uint64_t threadlet) {
    queue_.push(Event{t, node, threadlet, seq_++});
}

std::uint32_t Engine::owner_of(const std::string& key) const {
    return static_cast<std::uint32_t>(mix64(fnv1a(key) ^ partition_seed_) % cfg_.node_count);
}

picos Engine::occupy_lane(std::uint32_t node, picos earliest, picos duration) {
    auto& lanes = nodes_[node].lane_free;
    std::size_t best = 0;
    for (std::size_t i = 1; i < lanes.size(); ++i)
        if (lanes[i] < lanes[best]) best = i;
    const picos start = std::max(earliest, lanes[best]);
    std::uint32_t busy = 1;
    for (picos f : lanes)
        if (f > start) ++busy;
    if (busy > max_concurrent_) max_concurrent_ = busy;
    lanes[best] = start + duration;
    nodes_[node].busy_ps += duration;
    return start + duration;
}

void Engine::account_fabric(std::uint32_t src, std::uint32_t dst, std::uint64_t bytes) {
    if (src == dst) {
        traffic_.intra_node_bytes += bytes;
        return;
    }
    traffic_.fabric_payload_bytes += bytes;
    traffic_.fabric_link_bytes += bytes * topo_.hops(src, dst);
}

void Engine::log_line(picos t, std::uint32_t node, std::uint64_t tl, Opcode op,
                      std::uint64_t intra, std::uint64_t payload, std::uint64_t link) {
    if (opts_.log_events) log_.push_back({t, node, tl, op, intra, payload, link});
}

StageStats Engine::run_to_completion() {
    stage_arrival_max_ = 0;
    while (!queue_.empty()) {
        const Event ev = queue_.top();
        queue_.pop();
        if (++events_processed_ > opts_.step_budget)
            throw engine_error("step budget of " + std::to_string(opts_.step_budget) +
                               " events exceeded; program does not terminate");
        execute(ev);
    }
    return {max_completion_, std::max(stage_arrival_max_, max_completion_)};
}

void Engine::execute(const Event& ev) {
    Threadlet& tl = threadlets_[ev.threadlet];
    if (tl.status == ThreadletStatus::done) return;
    tl.status = ThreadletStatus::runnable;
    const auto& prog = programs_[tl.program];
    if (tl.pc >= prog.size()) {
        tl.status = ThreadletStatus::done;
        ++retired_;
        note_completion(ev.time);
        return;
    }
    const Instruction& ins = prog[tl.pc];
    picos next = ev.time;
    switch (ins.op) {
        case Opcode::halt:
            tl.status = ThreadletStatus::done;
            ++retired_;
            note_completion(ev.time);
            log_line(ev.time, tl.node, tl.id, Opcode::halt, 0, 0, 0);
            return;

        case Opcode::scan_compare:
            next = do_scan_compare(ev, tl, ins);
            break;

        case Opcode::scan_route:
            next = do_scan_route(ev, tl, ins);
            break;

        case Opcode::migrate: {
            const std::uint32_t dst = ins.migrate.dst;
            if (dst >= cfg_.node_count) throw topology_error("migrate target out of range");
            const std::uint32_t h = topo_.hops(tl.node, dst);
            std::uint64_t payload = 0, link = 0;
            if (dst != tl.node) {
                payload = tl.state_bytes;
                link = tl.state_bytes * h;
                traffic_.fabric_payload_bytes += payload;
                traffic_.fabric_link_bytes += link;
            }
            log_line(ev.time, tl.node, tl.id, Opcode::migrate, 0, payload, link);
            tl.node = dst;
            tl.status = ThreadletStatus::migrating;
            ++tl.pc;
            next = ev.time + static_cast<picos>(h) * hop_ps_;
            note_completion(next);
            schedule(next, dst, tl.id);
            return;
        }

        case Opcode::spawn: {
            const auto& a = ins.spawn;
            if (a.dst >= cfg_.node_count) throw topology_error("spawn target out of range");
            if (a.program >= programs_.size()) throw engine_error("unknown child program");
            const std::uint32_t h = topo_.hops(tl.node, a.dst);
            std::uint64_t payload = 0, link = 0;
            if (a.dst != tl.node) {
                payload = a.child_state_bytes;
                link = a.child_state_bytes * h;
                traffic_.fabric_payload_bytes += payload;
                traffic_.fabric_link_bytes += link;
            }
            Threadlet child;
            child.id = threadlets_.size();
            child.program = a.program;
            child.node = a.dst;
            child.state_bytes = a.child_state_bytes;
            threadlets_.push_back(child);
            ++spawned_;
            const picos arrival = ev.time + static_cast<picos>(h) * hop_ps_;
            schedule(arrival, a.dst, child.id);
            log_line(ev.time, tl.node, tl.id, Opcode::spawn, 0, payload, link);
            break;
        }

        case Opcode::spawn_all: {
            const auto& a = ins.spawn_all;
            if (a.program >= programs_.size()) throw engine_error("unknown child program");
            const std::uint64_t link_units = topo_.hops_sum(tl.node, 0, cfg_.node_count);
            const std::uint64_t payload =
                a.child_state_bytes * (cfg_.node_count - 1);  // self spawn stays local
            traffic_.fabric_payload_bytes += payload;
            traffic_.fabric_link_bytes += a.child_state_bytes * link_units;
            for (std::uint32_t node = 0; node < cfg_.node_count; ++node) {
                Threadlet child;
                child.id = threadlets_.size();
                child.program = a.program;
                child.node = node;
                child.state_bytes = a.child_state_bytes;
                threadlets_.push_back(child);
                ++spawned_;
                const picos arrival =
                    ev.time + static_cast<picos>(topo_.hops(tl.node, node)) * hop_ps_;
                schedule(arrival, node, child.id);
            }
            log_line(ev.time, tl.node, tl.id, Opcode::spawn_all, 0, payload,
                     a.child_state_bytes * link_units);
            break;
        }

        case Opcode::emit: {
            const auto& a = ins.emit;
            const std::uint64_t bytes = a.fixed_bytes + a.per_match_bytes * tl.accumulator;
            traffic_.match_count += a.per_match_bytes ? tl.accumulator : 0;
            if (bytes > 0) {
                const std::uint32_t h = topo_.hops(tl.node, a.dst);
                account_fabric(tl.node, a.dst, bytes);
                const picos arrival = ev.time + static_cast<picos>(h) * hop_ps_;
                note_completion(arrival);
                note_arrival(arrival);
                // logged at arrival so re-summing the log reproduces response
                log_line(arrival, tl.node, tl.id, Opcode::emit, tl.node == a.dst ? bytes : 0,
                         tl.node == a.dst ? 0 : bytes,
                         tl.node == a.dst ? 0 : bytes * h);
            }
            break;
        }

        case Opcode::hash_put:
        case Opcode::hash_probe:
        case Opcode::btree_find:
            next = do_single_digest(ev, tl, ins);
            break;

        case Opcode::hash_put_batch:
        case Opcode::hash_probe_batch:
        case Opcode::btree_build_batch:
        case Opcode::btree_find_batch:
        case Opcode::summary_match_batch:
            next = do_batch(ev, tl, ins);
            break;
    }
    if (tl.status == ThreadletStatus::done) return;
    // per-row scans stay on the same instruction until the range is done
    if (ins.op != Opcode::scan_compare || tl.rows_done == 0) ++tl.pc;
    note_completion(next);
    schedule(next, tl.node, tl.id);
}

picos Engine::do_scan_compare(const Event& ev, Threadlet& tl, const Instruction& ins) {
    const RelationContext& ctx = relations_.at(ins.scan.relation);
    const std::uint64_t k = ctx.node_rows[tl.node];
    const bool materialized = ctx.rel != nullptr && !ctx.node_row_ids.empty();

    if (!opts_.per_row_events) {
        const picos done = occupy_lane(tl.node, ev.time, static_cast<picos>(k) * scan_ps_);
        const std::uint64_t intra = k * ctx.attr_width;
        traffic_.intra_node_bytes += intra;
        std::uint64_t matches = 0;
        if (materialized) {
            for (std::uint64_t row : ctx.node_row_ids[tl.node]) {
                if (ctx.rel->attribute_bytes(row, ctx.attr_index) == ins.scan.value) {
                    select_matches_.push_back(row);
                    ++matches;
                }
            }
        } else if (!ctx.node_matches.empty()) {
            matches = ctx.node_matches[tl.node];
        }
        tl.accumulator = matches;
        log_line(done, tl.node, tl.id, Opcode::scan_compare, intra, 0, 0);
        return done;
    }

    // One event per row; costs and matches are identical to the batch by
    // construction (integer picosecond arithmetic).
    if (k == 0) {
        tl.rows_done = 0;
        return ev.time;
    }
    const picos done = occupy_lane(tl.node, ev.time, scan_ps_);
    traffic_.intra_node_bytes += ctx.attr_width;
    bool match = false;
    if (materialized) {
        const std::uint64_t row = ctx.node_row_ids[tl.node][tl.rows_done];
        if (ctx.rel->attribute_bytes(row, ctx.attr_index) == ins.scan.value) {
            select_matches_.push_back(row);
            match = true;
        }
    } else if (!ctx.node_matches.empty()) {
        match = tl.rows_done < ctx.node_matches[tl.node];
    }
    if (match) ++tl.accumulator;
    log_line(done, tl.node, tl.id, Opcode::scan_compare, ctx.attr_width, 0, 0);
    ++tl.rows_done;
    if (tl.rows_done >= k) tl.rows_done = 0;  // range finished; pc may advance
    return done;
}

picos Engine::do_scan_route(const Event& ev, Threadlet& tl, const Instruction& ins) {
    const auto& a = ins.route;
    const RelationContext& ctx = relations_.at(a.relation);
    const std::uint64_t k = ctx.node_rows[tl.node];
    const std::uint32_t n_nodes = cfg_.node_count;
    const bool materialized = ctx.rel != nullptr && !ctx.node_row_ids.empty();

    const picos done = occupy_lane(tl.node, ev.time, static_cast<picos>(k) * scan_ps_);
    std::uint64_t intra = k * ctx.attr_width;  // reading the attribute locally
    std::uint64_t payload = 0, link = 0;

    if (k > 0 && materialized) {
        std::unordered_map<std::uint32_t, std::vector<Digest>> groups;
        for (std::uint64_t row : ctx.node_row_ids[tl.node]) {
            auto bytes = ctx.rel->attribute_bytes(row, ctx.attr_index);
            std::string key(bytes.begin(), bytes.end());
            const std::uint32_t owner = owner_of(key);
            groups[owner].push_back({std::move(key), row, tl.node});
        }
        for (auto& [owner, digests] : groups) {
            const std::uint64_t cnt = digests.size();
            const std::uint64_t bytes =
                a.fp_bits ? fp_bytes(cnt, a.fp_bits) : cnt * a.digest_bytes;
            const std::uint32_t h = topo_.hops(tl.node, owner);
            if (owner == tl.node) {
                intra += bytes;
            } else {
                payload += bytes;
                link += a.fp_bits ? (cnt * h * a.fp_bits + 7) / 8 : cnt * a.digest_bytes * h;
            }
            note_arrival(done + static_cast<picos>(h) * hop_ps_);
            Inbox& box = nodes_[owner].inbox[a.phase];
            box.count += cnt;
            for (auto& d : digests) box.items.push_back(std::move(d));
        }
    } else if (k > 0) {
        // Metadata run: keys spread evenly over owners with a seeded
        // rotation; counts land in a difference array, bytes in closed form.
        const std::uint64_t q = k / n_nodes;
        const std::uint32_t r = static_cast<std::uint32_t>(k % n_nodes);
        const std::uint32_t rot = static_cast<std::uint32_t>(
            mix64(partition_seed_ ^ (std::uint64_t{a.phase} << 32) ^ tl.node) % n_nodes);

        bool self_in_window = false;
        std::uint64_t window_units = 0;
        std::uint32_t max_h = 0;
        auto window_part = [&](std::uint32_t lo, std::uint32_t hi) {
            if (lo >= hi) return;
            window_units += topo_.hops_sum(tl.node, lo, hi);
            max_h = std::max(max_h, topo_.hops_max(tl.node, lo, hi));
            if (tl.node >= lo && tl.node < hi) self_in_window = true;
        };
        if (rot + r <= n_nodes) {
            window_part(rot, rot + r);
        } else {
            window_part(rot, n_nodes);
            window_part(0, rot + r - n_nodes);
        }
        if (q > 0) max_h = topo_.hops_max(tl.node, 0, n_nodes);

        const std::uint64_t self_cnt = q + (self_in_window ? 1 : 0);
        const std::uint64_t out_cnt = k - self_cnt;
        const std::uint64_t units = q * topo_.hops_sum(tl.node, 0, n_nodes) + window_units;
        if (a.fp_bits) {
            payload = fp_bytes(out_cnt, a.fp_bits);
            link = (units * a.fp_bits + 7) / 8;
            intra += fp_bytes(self_cnt, a.fp_bits);
        } else {
            payload = out_cnt * a.digest_bytes;
            link = units * a.digest_bytes;
            intra += self_cnt * a.digest_bytes;
        }
        note_arrival(done + static_cast<picos>(max_h) * hop_ps_);

        PendingRoute& pend = pending_routes_[a.phase];
        if (pend.window_diff.empty()) pend.window_diff.assign(n_nodes + 1, 0);
        pend.base += q;
        pend.dirty = true;
        if (r > 0) {
            if (rot + r <= n_nodes) {
                pend.window_diff[rot] += 1;
                pend.window_diff[rot + r] -= 1;
            } else {
                pend.window_diff[rot] += 1;
                pend.window_diff[n_nodes] -= 1;
                pend.window_diff[0] += 1;
                pend.window_diff[rot + r - n_nodes] -= 1;
            }
        }
    }

    traffic_.intra_node_bytes += intra;
    traffic_.fabric_payload_bytes += payload;
    traffic_.fabric_link_bytes += link;
    log_line(done, tl.node, tl.id, Opcode::scan_route, intra, payload, link);
    return done;
}

void Engine::set_planted_matches(std::uint32_t phase, std::vector<std::uint64_t> per_node) {
    if (per_node.size() != cfg_.node_count)
        throw engine_error("planted match vector does not cover every node");
    planted_[phase] = std::move(per_node);
}

std::vector<std::uint64_t> Engine::inbox_counts(std::uint32_t phase) {
    auto it = pending_routes_.find(phase);
    if (it != pending_routes_.end() && it->second.dirty) {
        PendingRoute& pend = it->second;
        std::int64_t running = 0;
        for (std::uint32_t node = 0; node < cfg_.node_count; ++node) {
            running += pend.window_diff[node];
            const std::uint64_t cnt = pend.base + static_cast<std::uint64_t>(running);
            if (cnt > 0) nodes_[node].inbox[phase].count += cnt;
        }
        pend.base = 0;
        pend.window_diff.assign(cfg_.node_count + 1, 0);
        pend.dirty = false;
    }
    std::vector<std::uint64_t> counts(cfg_.node_count, 0);
    for (std::uint32_t node = 0; node < cfg_.node_count; ++node) {
        auto box = nodes_[node].inbox.find(phase);
        if (box != nodes_[node].inbox.end()) counts[node] = box->second.count;
    }
    return counts;
}

picos Engine::do_batch(const Event& ev, Threadlet& tl, const Instruction& ins) {
    const BatchArgs& a = ins.batch;
    NodeState& node = nodes_[tl.node];
    // Bulk routing must be folded before workers run.
    auto pend = pending_routes_.find(a.phase);
    if (pend != pending_routes_.end() && pend->second.dirty) inbox_counts(a.phase);

    Inbox& box = node.inbox[a.phase];
    const std::uint64_t cnt = box.count;
    const std::uint64_t conc = std::min<std::uint64_t>(cfg_.threads_per_node,
                                                       cnt > 0 ? cnt : 1);
    std::uint64_t intra = 0, payload = 0, link = 0;
    picos duration = 0;
    std::uint64_t matches = 0;
    picos wire_latency = 0;
    auto planted_at = [&](std::uint32_t phase) -> std::uint64_t {
        auto it = planted_.find(phase);
        return it != planted_.end() ? it->second[tl.node] : a.planted_matches;
    };

    switch (ins.op) {
        case Opcode::hash_put_batch: {
            duration = ceil_div_ps(static_cast<picos>(cnt) * scan_ps_, conc);
            intra = cnt * a.digest_bytes;
            node.hash_bytes += cnt * a.digest_bytes;
            node.hash_count += cnt;
            if (node.hash_bytes > cfg_.node_mem_bytes)
                throw engine_error("hash partition at node " + std::to_string(tl.node) +
                                   " exceeds node memory (" + std::to_string(node.hash_bytes) +
                                   " > " + std::to_string(cfg_.node_mem_bytes) + " bytes)");
            for (auto& d : box.items) node.hash_refs[d.key].push_back(d.ref);
            break;
        }
        case Opcode::hash_probe_batch: {
            duration = ceil_div_ps(static_cast<picos>(cnt) * scan_ps_, conc);
            intra = cnt * a.digest_bytes;
            if (!box.items.empty()) {
                for (const auto& d : box.items) {
                    if (owner_of(d.key) != tl.node)
                        throw engine_error("locality violation: probe for a non-local key "
                                           "partition; threadlets must migrate first");
                    auto hit = node.hash_refs.find(d.key);
                    if (hit == node.hash_refs.end()) continue;
                    for (std::uint64_t r_ref : hit->second) {
                        join_pairs_.emplace_back(r_ref, d.ref);
                        ++matches;
                    }
                }
            } else {
                matches = planted_at(a.phase);
            }
            break;
        }
        case Opcode::btree_build_batch: {
            node.btree_count += cnt;
            const std::uint64_t visits = std::max<std::uint64_t>(1, ceil_log2(node.btree_count));
            duration = ceil_div_ps(static_cast<picos>(cnt * visits) * scan_ps_, conc);
            intra = cnt * a.entry_bytes;
            for (auto& d : box.items) node.btree_refs[d.key].push_back(d.ref);
            break;
        }
        case Opcode::btree_find_batch: {
            const std::uint64_t size = std::max<std::uint64_t>(1, node.btree_count);
            const std::uint64_t visits = std::max<std::uint64_t>(1, ceil_log2(size));
            duration = ceil_div_ps(static_cast<picos>(cnt * visits) * scan_ps_, conc);
            intra = cnt * visits * a.entry_bytes;
            if (!box.items.empty()) {
                for (const auto& d : box.items) {
                    if (owner_of(d.key) != tl.node)
                        throw engine_error("locality violation: probe for a non-local key "
                                           "partition; threadlets must migrate first");
                    auto hit = node.btree_refs.find(d.key);
                    if (hit == node.btree_refs.end()) continue;
                    for (std::uint64_t r_ref : hit->second) {
                        join_pairs_.emplace_back(r_ref, d.ref);
                        ++matches;
                    }
                }
            } else {
                matches = planted_at(a.phase);
            }
            break;
        }
        case Opcode::summary_match_batch: {
            auto pend_s = pending_routes_.find(a.summary_phase_s);
            if (pend_s != pending_routes_.end() && pend_s->second.dirty)
                inbox_counts(a.summary_phase_s);
            Inbox& probe_box = node.inbox[a.summary_phase_s];
            const std::uint64_t cnt_s = probe_box.count;
            const std::uint64_t work = cnt + cnt_s;
            const std::uint64_t conc2 =
                std::min<std::uint64_t>(cfg_.threads_per_node, work > 0 ? work : 1);
            duration = ceil_div_ps(static_cast<picos>(work) * scan_ps_, conc2);
            intra = fp_bytes(work, cfg_.summary_bits_per_key);
            std::uint32_t max_h = 0;
            if (!box.items.empty() || !probe_box.items.empty()) {
                std::unordered_map<std::string, std::vector<const Digest*>> build;
                for (const auto& d : box.items) build[d.key].push_back(&d);
                for (const auto& d : probe_box.items) {
                    auto hit = build.find(d.key);
                    if (hit == build.end()) continue;
                    for (const Digest* rd : hit->second) {
                        join_pairs_.emplace_back(rd->ref, d.ref);
                        ++matches;
                        // matched digests (key + ref) are fetched from both homes
                        for (std::uint32_t home : {rd->home, d.home}) {
                            const std::uint32_t h = topo_.hops(home, tl.node);
                            if (home == tl.node) {
                                intra += a.digest_bytes;
                            } else {
                                payload += a.digest_bytes;
                                link += a.digest_bytes * h;
                            }
                            max_h = std::max(max_h, h);
                        }
                    }
                }
            } else {
                matches = planted_at(a.phase);
                // Fetch sources are apportioned evenly over the nodes, one
                // rotation window per side.
                for (int side = 0; side < 2; ++side) {
                    const std::uint64_t q = matches / cfg_.node_count;
                    const std::uint32_t r =
                        static_cast<std::uint32_t>(matches % cfg_.node_count);
                    const std::uint32_t rot = static_cast<std::uint32_t>(
                        mix64(a.fetch_seed ^ (side + 1) ^ tl.node) % cfg_.node_count);
                    std::uint64_t units = q * topo_.hops_sum(tl.node, 0, cfg_.node_count);
                    std::uint64_t self_cnt = q;
                    auto add_window = [&](std::uint32_t lo, std::uint32_t hi) {
                        if (lo >= hi) return;
                        units += topo_.hops_sum(tl.node, lo, hi);
                        max_h = std::max(max_h, topo_.hops_max(tl.node, lo, hi));
                        if (tl.node >= lo && tl.node < hi) ++self_cnt;
                    };
                    if (rot + r <= cfg_.node_count) {
                        add_window(rot, rot + r);
                    } else {
                        add_window(rot, cfg_.node_count);
                        add_window(0, rot + r - cfg_.node_count);
                    }
                    if (q > 0) max_h = std::max(max_h, topo_.hops_max(tl.node, 0, cfg_.node_count));
                    payload += (matches - self_cnt) * a.digest_bytes;
                    link += units * a.digest_bytes;
                    intra += self_cnt * a.digest_bytes;
                }
            }
            wire_latency = 2 * static_cast<picos>(max_h) * hop_ps_;  // request + transfer
            probe_box.count = 0;
            probe_box.items.clear();
            break;
        }
        default:
            throw engine_error("not a batch opcode");
    }

    box.count = 0;
    box.items.clear();
    tl.accumulator = matches;
    traffic_.intra_node_bytes += intra;
    traffic_.fabric_payload_bytes += payload;
    traffic_.fabric_link_bytes += link;
    const picos done = occupy_lane(tl.node, ev.time, duration) + wire_latency;
    log_line(done, tl.node, tl.id, ins.op, intra, payload, link);
    return done;
}

picos Engine::do_single_digest(const Event& ev, Threadlet& tl, const Instruction& ins) {
    NodeState& node = nodes_[tl.node];
    const BatchArgs& a = ins.batch;
    if (owner_of(tl.carry_key) != tl.node)
        throw engine_error("locality violation: threadlet at node " + std::to_string(tl.node) +
                           " touched a key partition owned by node " +
                           std::to_string(owner_of(tl.carry_key)) +
                           "; threadlets must migrate first");
    std::uint64_t intra = 0;
    picos duration = scan_ps_;
    switch (ins.op) {
        case Opcode::hash_put:
            node.hash_refs[tl.carry_key].push_back(tl.carry_ref);
            ++node.hash_count;
            node.hash_bytes += a.digest_bytes;
            if (node.hash_bytes > cfg_.node_mem_bytes)
                throw engine_error("hash partition at node " + std::to_string(tl.node) +
                                   " exceeds node memory");
            intra = a.digest_bytes;
            break;
        case Opcode::hash_probe: {
            intra = a.digest_bytes;
            auto hit = node.hash_refs.find(tl.carry_key);
            if (hit != node.hash_refs.end()) {
                for (std::uint64_t r_ref : hit->second) {
                    join_pairs_.emplace_back(r_ref, tl.carry_ref);
                    ++tl.accumulator;
                }
            }
            break;
        }
        case Opcode::btree_find: {
            const std::uint64_t size = std::max<std::uint64_t>(1, node.btree_count);
            const std::uint64_t visits = std::max<std::uint64_t>(1, ceil_log2(size));
            duration = static_cast<picos>(visits) * scan_ps_;
            intra = visits * a.entry_bytes;
            auto hit = node.btree_refs.find(tl.carry_key);
            if (hit != node.btree_refs.end()) {
                for (std::uint64_t r_ref : hit->second) {
                    join_pairs_.emplace_back(r_ref, tl.carry_ref);
                    ++tl.accumulator;
                }
            }
            break;
        }
        default:
            throw engine_error("not a single-digest opcode");
    }
    traffic_.intra_node_bytes += intra;
    const picos done = occupy_lane(tl.node, ev.time, duration);
    log_line(done, tl.node, tl.id, ins.op, intra, 0, 0);
    return done;
}

const EngineReport& Engine::report() {
    report_.traffic = traffic_;
    report_.traffic.response_ms = static_cast<double>(max_completion_) * 1e-9;
    report_.traffic.apply_energy(cfg_.channel_energy_weights);
    report_.spawned = spawned_;
    report_.retired = retired_;
    report_.live = spawned_ - retired_;
    report_.events_processed = events_processed_;
    report_.completion_ps = max_completion_;
    report_.max_concurrent = max_concurrent_;
    report_.node_busy_ps.resize(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) report_.node_busy_ps[i] = nodes_[i].busy_ps;
    return report_;
}

void write_event_log(const std::vector<EventLogLine>& log, std::ostream& out) {
    out << "time_ns,node,threadlet,opcode,bytes_intra,bytes_fabric_payload,bytes_fabric_link\n";
    char buf[64];
    for (const auto& line : log) {
        std::snprintf(buf, sizeof buf, "%lld.%03lld", static_cast<long long>(line.time / 1000),
                      static_cast<long long>(line.time % 1000));
        out << buf << ',' << line.node << ',' << line.threadlet << ',' << opcode_name(line.op)
            << ',' << line.bytes_intra << ',' << line.bytes_fabric_payload << ','
            << line.bytes_fabric_link << '\n';
    }
}

void write_event_log(const std::vector<EventLogLine>& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot open event log path: " + path);
    write_event_log(log, out);
}

void Engine::dump_event_log(const std::string& path) const { write_event_log(log_, path); }

std::vector<std::uint64_t> Engine::take_select_matches() {
    std::sort(select_matches_.begin(), select_matches_.end());
    return std::move(select_matches_);
}

std::vector<std::pair<std::uint64_t, std::uint64_t>> Engine::take_join_pairs() {
    std::sort(join_pairs_.begin(), join_pairs_.end());
    return std::move(join_pairs_);
}

}  // namespace mnms
