#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <queue>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "epibb/metrics.hpp"
#include "epibb/scenario.hpp"
#include "epibb/trace.hpp"
#include "epibb/worker.hpp"

namespace epibb {

class AuditError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Disjoint half-open intervals over leaf indices, merged on insert.
class IntervalSet {
public:
    void add(std::uint32_t lo, std::uint32_t hi) {
        if (lo >= hi) {
            return;
        }
        auto it = iv_.upper_bound(lo);
        if (it != iv_.begin()) {
            auto prev = std::prev(it);
            if (prev->second >= lo) {
                lo = prev->first;
                hi = std::max(hi, prev->second);
                it = iv_.erase(prev);
            }
        }
        while (it != iv_.end() && it->first <= hi) {
            hi = std::max(hi, it->second);
            it = iv_.erase(it);
        }
        iv_[lo] = hi;
    }

    bool covers(std::uint32_t lo, std::uint32_t hi) const {
        auto it = iv_.upper_bound(lo);
        if (it == iv_.begin()) {
            return false;
        }
        --it;
        return it->second >= hi;
    }

    bool covers_all(std::uint32_t n) const {
        return iv_.size() == 1 && iv_.begin()->first == 0 && iv_.begin()->second >= n;
    }

    const std::map<std::uint32_t, std::uint32_t>& segments() const { return iv_; }

private:
    std::map<std::uint32_t, std::uint32_t> iv_;
};

/// Deterministic discrete-event engine: one global (time, seq) ordered
/// queue, the affine latency model with loss and partitions, crash and join
/// injection, and the global audit hooks.
class SimKernel final : public WorkerEnv {
public:
    SimKernel(const Scenario& sc, const BasicTree& tree) : sc_(sc), tree_(tree), streams_(sc.seed) {
        pp_ = sc_.protocol;
        if (pp_.request_timeout_s <= 0.0) {
            // Ten times the latency of a nominal 256-byte message.
            pp_.request_timeout_s = 10.0 * sc_.network.latency_s(256);
        }
        max_sim_time_ = sc_.max_sim_time_s > 0.0 ? sc_.max_sim_time_s
                                                 : std::max(100.0 * tree_.total_time(), 60.0);
        const int total = sc_.total_processes();
        for (int p = 0; p < sc_.processes; ++p) {
            static_members_.push_back(p);  // joiners are discovered via gossip
        }
        group_of_.assign(total, 0);
        expanded_.assign(tree_.size(), false);
        current_bytes_.assign(total, 0);
        for (int p = 0; p < total; ++p) {
            workers_.push_back(std::make_unique<Worker>(p, tree_, pp_, sc_.membership, *this));
        }
        audit_ = sc_.audit;
        audit_conservation_ = audit_ && sc_.network.loss_prob == 0.0 && sc_.crashes.empty() &&
                              sc_.partitions.empty();
        if (!sc_.trace_path.empty()) {
            trace_.open(sc_.trace_path);
        }
    }

    RunResult run() {
        seed_events();
        Outcome outcome = Outcome::Timeout;
        double end_time = 0.0;
        while (!queue_.empty()) {
            Event ev = pop_event();
            if (ev.t > max_sim_time_) {
                end_time = max_sim_time_;
                outcome = Outcome::Timeout;
                break;
            }
            now_ = ev.t;
            end_time = now_;
            dispatch(ev);
            ++events_processed_;
            if (audit_conservation_) {
                check_conservation();
            }
            if (pending_joins_ == 0 && running_ == 0) {
                outcome = terminated_count_ > 0 ? Outcome::Terminated : Outcome::TotalFailure;
                break;
            }
        }
        return finalize(outcome, end_time);
    }

    /// Post-run inspection (views, tables) for tests and tools.
    const Worker& worker(int pid) const { return *workers_[static_cast<std::size_t>(pid)]; }

    // -- WorkerEnv ----------------------------------------------------------

    void send(Message msg, double now) override {
        auto& sender = *workers_[static_cast<std::size_t>(msg.sender)];
        const std::size_t bytes = msg.size_bytes();
        sender.counters().comm_bytes_sent += bytes;
        ++sender.counters().messages_sent[static_cast<int>(msg.kind)];
        trace_event([&](nlohmann::json& r) {
            r["ev"] = "send";
            r["p"] = msg.sender;
            r["kind"] = to_string(msg.kind);
            r["peer"] = msg.receiver;
            r["bytes"] = bytes;
        });
        if (sc_.network.loss_prob > 0.0 &&
            uniform01(streams_.stream(msg.sender, RngStreams::Purpose::Loss)) < sc_.network.loss_prob) {
            drop(msg, bytes, "loss");
            return;
        }
        if (group_of_[msg.sender] != group_of_[msg.receiver]) {
            drop(msg, bytes, "partition");
            return;
        }
        const double at = now + sc_.network.latency_s(bytes);
        Event ev;
        ev.t = at;
        ev.seq = next_seq_++;
        ev.kind = Event::Kind::Deliver;
        ev.proc = msg.receiver;
        ev.msg = std::move(msg);
        if (audit_conservation_ && ev.msg.kind == MsgKind::WorkGrant) {
            inflight_grants_[ev.seq] = ev.msg.codes;
        }
        queue_.push(std::move(ev));
    }

    void arm_timer(int pid, double at, TimerKind kind, std::uint64_t gen) override {
        Event ev;
        ev.t = at;
        ev.seq = next_seq_++;
        ev.kind = Event::Kind::Timer;
        ev.proc = pid;
        ev.timer = kind;
        ev.gen = gen;
        queue_.push(std::move(ev));
    }

    std::mt19937_64& target_rng(int pid) override {
        return streams_.stream(pid, RngStreams::Purpose::Target);
    }

    const std::vector<int>& static_members() const override { return static_members_; }

    void on_compute(int pid, std::int32_t node, const ProblemCode& code, double duration,
                    double now) override {
        trace_event([&](nlohmann::json& r) {
            r["ev"] = "compute";
            r["p"] = pid;
            r["node"] = tree_.node(node).id;
            r["code"] = code.str();
            r["dur"] = duration;
        });
    }

    void on_expand(int pid, std::int32_t node, double now) override {
        if (expanded_[static_cast<std::size_t>(node)]) {
            workers_[static_cast<std::size_t>(pid)]->counters().redundant_work_time +=
                tree_.node(node).time_cost;
        } else {
            expanded_[static_cast<std::size_t>(node)] = true;
        }
    }

    void on_complete(int pid, const ProblemCode& code, double now) override {
        const std::int32_t idx = tree_.resolve(code);
        if (idx < 0) {
            throw AuditError("completed code outside the tree: " + code.str());
        }
        const auto& n = tree_.node(idx);
        truth_.add(n.leaf_lo, n.leaf_hi);
        trace_event([&](nlohmann::json& r) {
            r["ev"] = "complete";
            r["p"] = pid;
            r["code"] = code.str();
        });
    }

    void on_table_merge(int pid, std::span<const ProblemCode> incoming, double now) override {
        if (!audit_) {
            return;
        }
        // Soundness: nobody may learn of a completion that never happened.
        for (const auto& code : incoming) {
            const std::int32_t idx = tree_.resolve(code);
            if (idx < 0) {
                throw AuditError("table code outside the tree: " + code.str());
            }
            const auto& n = tree_.node(idx);
            if (!truth_.covers(n.leaf_lo, n.leaf_hi)) {
                throw AuditError("process " + std::to_string(pid) +
                                 " merged a code that was never completed: " + code.str());
            }
        }
    }

    void on_best(int pid, double value, double now) override {
        trace_event([&](nlohmann::json& r) {
            r["ev"] = "best";
            r["p"] = pid;
            r["value"] = value;
        });
    }

    void on_recover(int pid, const ProblemCode& code, double now) override {
        trace_event([&](nlohmann::json& r) {
            r["ev"] = "recover";
            r["p"] = pid;
            r["code"] = code.str();
        });
    }

    void on_terminated(int pid, double now) override {
        if (audit_ && !truth_.covers_all(tree_.leaf_count())) {
            throw AuditError("process " + std::to_string(pid) +
                             " terminated before global work was complete");
        }
        --running_;
        ++terminated_count_;
        trace_event([&](nlohmann::json& r) {
            r["ev"] = "terminate";
            r["p"] = pid;
        });
    }

    void storage_sample(int pid, std::size_t bytes) override {
        auto& w = *workers_[static_cast<std::size_t>(pid)];
        w.counters().storage_peak_bytes = std::max<std::uint64_t>(w.counters().storage_peak_bytes, bytes);
        global_bytes_ += bytes;
        global_bytes_ -= current_bytes_[static_cast<std::size_t>(pid)];
        current_bytes_[static_cast<std::size_t>(pid)] = bytes;
        if (global_bytes_ > global_peak_bytes_) {
            // Re-measure cross-process overlap when the peak has grown
            // noticeably (1% or 64 bytes); exact peak total, sampled redundancy.
            if (global_bytes_ >=
                redundancy_measured_at_ + std::max<std::uint64_t>(64, redundancy_measured_at_ / 100)) {
                measure_redundancy();
                redundancy_measured_at_ = global_bytes_;
            }
            global_peak_bytes_ = global_bytes_;
        }
    }

private:
    struct Event {
        double t = 0.0;
        std::uint64_t seq = 0;
        enum class Kind { Deliver, Timer, Crash, Partition, Join } kind = Kind::Timer;
        int proc = -1;
        Message msg;
        TimerKind timer = TimerKind::ComputeDone;
        std::uint64_t gen = 0;
        int sched = -1;
    };

    struct EventCmp {
        bool operator()(const Event& a, const Event& b) const {
            if (a.t != b.t) {
                return a.t > b.t;
            }
            return a.seq > b.seq;
        }
    };

    Event pop_event() {
        Event ev = std::move(const_cast<Event&>(queue_.top()));
        queue_.pop();
        return ev;
    }

    void seed_events() {
        for (const auto& c : sc_.crashes) {
            Event ev;
            ev.t = c.time_s;
            ev.seq = next_seq_++;
            ev.kind = Event::Kind::Crash;
            ev.proc = c.process;
            queue_.push(std::move(ev));
        }
        for (std::size_t i = 0; i < sc_.partitions.size(); ++i) {
            Event ev;
            ev.t = sc_.partitions[i].time_s;
            ev.seq = next_seq_++;
            ev.kind = Event::Kind::Partition;
            ev.sched = static_cast<int>(i);
            queue_.push(std::move(ev));
        }
        for (std::size_t i = 0; i < sc_.joins.size(); ++i) {
            Event ev;
            ev.t = sc_.joins[i].time_s;
            ev.seq = next_seq_++;
            ev.kind = Event::Kind::Join;
            ev.proc = sc_.processes + static_cast<int>(i);
            queue_.push(std::move(ev));
            ++pending_joins_;
        }
        // Process 0 holds the root problem.
        for (int p = 0; p < sc_.processes; ++p) {
            workers_[static_cast<std::size_t>(p)]->start(0.0, p == 0, false);
            ++running_;
        }
    }

    void dispatch(Event& ev) {
        switch (ev.kind) {
            case Event::Kind::Deliver: {
                if (audit_conservation_) {
                    inflight_grants_.erase(ev.seq);
                }
                auto& w = *workers_[static_cast<std::size_t>(ev.proc)];
                if (w.status() != WorkerStatus::Running) {
                    auto& sender = *workers_[static_cast<std::size_t>(ev.msg.sender)];
                    ++sender.counters().messages_dropped;
                    trace_event([&](nlohmann::json& r) {
                        r["ev"] = "drop";
                        r["p"] = ev.msg.sender;
                        r["kind"] = to_string(ev.msg.kind);
                        r["peer"] = ev.proc;
                        r["bytes"] = ev.msg.size_bytes();
                        r["reason"] = "dead";
                    });
                    return;
                }
                trace_event([&](nlohmann::json& r) {
                    r["ev"] = "recv";
                    r["p"] = ev.proc;
                    r["kind"] = to_string(ev.msg.kind);
                    r["peer"] = ev.msg.sender;
                    r["bytes"] = ev.msg.size_bytes();
                });
                w.deliver(std::move(ev.msg), now_);
                break;
            }
            case Event::Kind::Timer:
                workers_[static_cast<std::size_t>(ev.proc)]->timer(ev.timer, ev.gen, now_);
                break;
            case Event::Kind::Crash: {
                auto& w = *workers_[static_cast<std::size_t>(ev.proc)];
                if (w.status() != WorkerStatus::Crashed && w.status() != WorkerStatus::Terminated) {
                    if (w.status() == WorkerStatus::Running) {
                        --running_;
                    }
                    w.crash(now_);
                    trace_event([&](nlohmann::json& r) {
                        r["ev"] = "crash";
                        r["p"] = ev.proc;
                    });
                }
                break;
            }
            case Event::Kind::Partition: {
                const auto& pe = sc_.partitions[static_cast<std::size_t>(ev.sched)];
                for (std::size_t g = 0; g < pe.groups.size(); ++g) {
                    for (int m : pe.groups[g]) {
                        group_of_[static_cast<std::size_t>(m)] = static_cast<int>(g);
                    }
                }
                trace_event([&](nlohmann::json& r) {
                    r["ev"] = "partition";
                    r["groups"] = pe.groups;
                });
                break;
            }
            case Event::Kind::Join: {
                --pending_joins_;
                auto& w = *workers_[static_cast<std::size_t>(ev.proc)];
                if (w.status() == WorkerStatus::NotStarted) {
                    trace_event([&](nlohmann::json& r) {
                        r["ev"] = "join";
                        r["p"] = ev.proc;
                    });
                    ++running_;
                    w.start(now_, false, true);
                }
                break;
            }
        }
    }

    void drop(const Message& msg, std::size_t bytes, const char* reason) {
        ++workers_[static_cast<std::size_t>(msg.sender)]->counters().messages_dropped;
        trace_event([&](nlohmann::json& r) {
            r["ev"] = "drop";
            r["p"] = msg.sender;
            r["kind"] = to_string(msg.kind);
            r["peer"] = msg.receiver;
            r["bytes"] = bytes;
            r["reason"] = reason;
        });
    }

    template <typename F>
    void trace_event(F&& fill) {
        if (!trace_.enabled()) {
            return;
        }
        nlohmann::json r;
        r["t"] = now_;
        fill(r);
        trace_.write(r);
    }

    /// Fault-free conservation: completed coverage plus the live frontier
    /// (pools, in-progress nodes, granted work in flight or parked in
    /// inboxes) must cover every leaf at every instant.
    void check_conservation() {
        std::vector<std::pair<std::uint32_t, std::uint32_t>> spans;
        for (const auto& [lo, hi] : truth_.segments()) {
            spans.emplace_back(lo, hi);
        }
        auto add_code = [&](const ProblemCode& code) {
            const std::int32_t idx = tree_.resolve(code);
            if (idx < 0) {
                throw AuditError("frontier code outside the tree: " + code.str());
            }
            spans.emplace_back(tree_.node(idx).leaf_lo, tree_.node(idx).leaf_hi);
        };
        for (const auto& w : workers_) {
            if (w->status() != WorkerStatus::Running) {
                continue;
            }
            for (const auto& code : w->frontier_codes()) {
                add_code(code);
            }
        }
        for (const auto& [seq, codes] : inflight_grants_) {
            for (const auto& code : codes) {
                add_code(code);
            }
        }
        std::sort(spans.begin(), spans.end());
        std::uint32_t reach = 0;
        for (const auto& [lo, hi] : spans) {
            if (lo > reach) {
                break;
            }
            reach = std::max(reach, hi);
        }
        if (reach < tree_.leaf_count()) {
            throw AuditError("conservation violated: leaf " + std::to_string(reach) +
                             " is neither completed nor on any live frontier");
        }
    }

    void measure_redundancy() {
        std::set<ProblemCode> distinct;
        std::uint64_t total = 0;
        std::uint64_t distinct_bytes = 0;
        for (const auto& w : workers_) {
            if (w->status() == WorkerStatus::Crashed || w->status() == WorkerStatus::NotStarted) {
                continue;
            }
            for (const auto* tbl : {&w->table(), &w->report_list()}) {
                for (const auto& code : tbl->codes()) {
                    total += 8 * code.depth();
                    if (distinct.insert(code).second) {
                        distinct_bytes += 8 * code.depth();
                    }
                }
            }
        }
        redundant_snapshot_bytes_ = total - distinct_bytes;
    }

    RunResult finalize(Outcome outcome, double end_time) {
        RunResult res;
        res.outcome = outcome;
        res.process_count = sc_.total_processes();
        res.execution_hours = end_time / 3600.0;
        res.events_processed = events_processed_;

        double min_terminated_best = std::numeric_limits<double>::infinity();
        double min_live_best = std::numeric_limits<double>::infinity();
        bool any_terminated = false;
        double denom = 0.0;
        for (auto& w : workers_) {
            w->finish_bookkeeping(end_time);
            if (w->status() == WorkerStatus::Terminated) {
                any_terminated = true;
                min_terminated_best = std::min(min_terminated_best, w->best().value);
                denom += w->ended_at() - w->started_at();
            }
            if (w->status() != WorkerStatus::Crashed && w->status() != WorkerStatus::NotStarted) {
                min_live_best = std::min(min_live_best, w->best().value);
            }
            ProcessStats ps;
            ps.id = w->id();
            ps.status = to_string(w->status());
            ps.started_at_s = w->started_at();
            ps.ended_at_s = w->ended_at();
            ps.best = w->best().value;
            ps.counters = w->counters();
            res.aggregate.add(ps.counters);
            res.per_process.push_back(std::move(ps));
        }
        if (audit_ && any_terminated) {
            for (const auto& w : workers_) {
                if (w->status() == WorkerStatus::Terminated &&
                    w->best().value != min_terminated_best) {
                    throw AuditError("terminated processes disagree on the optimum");
                }
            }
        }
        const double found = any_terminated ? min_terminated_best : min_live_best;
        if (found != std::numeric_limits<double>::infinity()) {
            res.optimum = found;
        }
        res.aggregate.storage_peak_bytes = global_peak_bytes_;
        res.aggregate.redundant_storage_bytes = redundant_snapshot_bytes_;
        if (denom > 0.0) {
            res.bnb_pct = 100.0 * res.aggregate.bnb_time / denom;
            res.contraction_pct = 100.0 * res.aggregate.contraction_time / denom;
        }
        res.storage_total_mb = static_cast<double>(global_peak_bytes_) / 1e6;
        res.storage_redundant_mb = static_cast<double>(redundant_snapshot_bytes_) / 1e6;
        if (res.execution_hours > 0.0 && res.process_count > 0) {
            res.comm_mb_per_hour_per_processor = static_cast<double>(res.aggregate.comm_bytes_sent) /
                                                 1e6 / res.execution_hours /
                                                 static_cast<double>(res.process_count);
        }
        trace_.close();
        res.trace_records = trace_.records();
        return res;
    }

    Scenario sc_;
    const BasicTree& tree_;
    RngStreams streams_;
    ProtocolParams pp_;
    double max_sim_time_ = 0.0;

    std::vector<std::unique_ptr<Worker>> workers_;
    std::vector<int> static_members_;
    std::vector<int> group_of_;
    std::priority_queue<Event, std::vector<Event>, EventCmp> queue_;
    std::uint64_t next_seq_ = 0;
    double now_ = 0.0;
    int pending_joins_ = 0;
    int running_ = 0;
    int terminated_count_ = 0;
    std::uint64_t events_processed_ = 0;

    bool audit_ = false;
    bool audit_conservation_ = false;
    IntervalSet truth_;
    std::vector<bool> expanded_;
    std::unordered_map<std::uint64_t, std::vector<ProblemCode>> inflight_grants_;

    std::vector<std::uint64_t> current_bytes_;
    std::uint64_t global_bytes_ = 0;
    std::uint64_t global_peak_bytes_ = 0;
    std::uint64_t redundancy_measured_at_ = 0;
    std::uint64_t redundant_snapshot_bytes_ = 0;

    TraceWriter trace_;
};

/// Builds the workload and runs the scenario to completion.
inline RunResult run_scenario(const Scenario& sc) {
    const BasicTree tree = build_scenario_tree(sc);
    SimKernel kernel(sc, tree);
    return kernel.run();
}

inline RunResult run_scenario(const Scenario& sc, const BasicTree& tree) {
    SimKernel kernel(sc, tree);
    return kernel.run();
}

}  // namespace epibb
