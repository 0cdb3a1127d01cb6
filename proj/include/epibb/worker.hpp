#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <set>
#include <stdexcept>
#include <variant>
#include <vector>

#include "epibb/bnb.hpp"
#include "epibb/code.hpp"
#include "epibb/membership.hpp"
#include "epibb/message.hpp"
#include "epibb/metrics.hpp"
#include "epibb/rng.hpp"
#include "epibb/tree.hpp"

namespace epibb {

class ProtocolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ProtocolParams {
    SelectionRule selection = SelectionRule::DepthFirst;
    bool pruning = true;
    int report_batch = 8;           // send the report list once it holds this many codes
    int report_fanout = 2;          // gossip each report to this many members
    double report_timeout_s = 5.0;  // or when the list has been stale this long
    bool table_gossip = true;
    double table_gossip_s = 30.0;
    double request_timeout_s = 0.0;  // resolved by the kernel when <= 0
    int fail_threshold = 3;          // failed work requests before recovery
    int min_grant_pool = 2;          // only grant when the pool is larger than this
    double contraction_cost_s = 10e-6;  // charged per code touched in contraction
};

struct MembershipParams {
    bool enabled = false;
    double gossip_s = 1.0;
    double fail_timeout_s = 30.0;
    std::vector<int> servers = {0};
    double join_retry_s = 3.0;
};

enum class TimerKind : std::uint8_t {
    ComputeDone = 0,
    ReportFlush,
    TableGossip,
    RequestTimeout,
    MemberGossip,
    JoinRetry,
};

inline constexpr int kTimerKindCount = 6;

enum class WorkerStatus { NotStarted, Running, Terminated, Crashed };

inline const char* to_string(WorkerStatus s) {
    switch (s) {
        case WorkerStatus::NotStarted: return "not-started";
        case WorkerStatus::Running: return "running";
        case WorkerStatus::Terminated: return "terminated";
        case WorkerStatus::Crashed: return "crashed";
    }
    return "?";
}

/// Services a worker needs from the simulation kernel: message transport,
/// timers, per-purpose RNG streams, and audit/trace hooks.
class WorkerEnv {
public:
    virtual ~WorkerEnv() = default;
    virtual void send(Message msg, double now) = 0;
    virtual void arm_timer(int pid, double at, TimerKind kind, std::uint64_t gen) = 0;
    virtual std::mt19937_64& target_rng(int pid) = 0;
    virtual const std::vector<int>& static_members() const = 0;
    virtual void on_compute(int pid, std::int32_t node, const ProblemCode& code, double duration, double now) = 0;
    virtual void on_expand(int pid, std::int32_t node, double now) = 0;
    virtual void on_complete(int pid, const ProblemCode& code, double now) = 0;
    virtual void on_table_merge(int pid, std::span<const ProblemCode> incoming, double now) = 0;
    virtual void on_best(int pid, double value, double now) = 0;
    virtual void on_recover(int pid, const ProblemCode& code, double now) = 0;
    virtual void on_terminated(int pid, double now) = 0;
    virtual void storage_sample(int pid, std::size_t bytes) = 0;
};

/// One simulated process: local pool execution, on-demand work sharing,
/// work-report gossip with the best-known value piggybacked, failure
/// recovery by sibling complement, and termination detection.
///
/// The worker is sequential in the paper's sense: messages and timers that
/// arrive while a subproblem is being solved queue up and are handled at
/// the subproblem boundary.
class Worker {
public:
    Worker(int id, const BasicTree& tree, ProtocolParams pp, MembershipParams mp, WorkerEnv& env)
        : id_(id), tree_(tree), pp_(std::move(pp)), mp_(std::move(mp)), env_(env),
          pool_(pp_.selection) {}

    int id() const { return id_; }
    WorkerStatus status() const { return status_; }
    const BestKnown& best() const { return best_; }
    const CompletedTable& table() const { return table_; }
    const CompletedTable& report_list() const { return list_; }
    const ActivePool& pool() const { return pool_; }
    const MembershipView& view() const { return view_; }
    MetricCounters& counters() { return counters_; }
    const MetricCounters& counters() const { return counters_; }
    double started_at() const { return started_at_; }
    double ended_at() const { return ended_at_; }
    int pending_requests() const { return pending_requests_; }

    std::optional<ProblemCode> computing_code() const {
        if (busy_ && current_.has_value()) {
            return current_->code;
        }
        return std::nullopt;
    }

    /// Frontier codes for the kernel's conservation audit: pooled work, the
    /// subproblem being computed, and granted work still parked in the inbox.
    std::vector<ProblemCode> frontier_codes() const {
        std::vector<ProblemCode> out;
        for (const auto& e : pool_.entries()) {
            out.push_back(e.code);
        }
        if (busy_ && current_.has_value()) {
            out.push_back(current_->code);
        }
        for (const auto& item : inbox_) {
            if (const auto* msg = std::get_if<Message>(&item)) {
                if (msg->kind == MsgKind::WorkGrant) {
                    out.insert(out.end(), msg->codes.begin(), msg->codes.end());
                }
            }
        }
        return out;
    }

    void start(double now, bool holds_root, bool joiner) {
        status_ = WorkerStatus::Running;
        started_at_ = now;
        idle_since_ = now;
        view_.reset(id_, now);
        if (mp_.enabled) {
            if (joiner) {
                for (int s : mp_.servers) {
                    if (s != id_) {
                        view_.add(s, now);
                    }
                }
                send_joins(now);
                arm(TimerKind::JoinRetry, now + mp_.join_retry_s, ++gen_[idx(TimerKind::JoinRetry)]);
            } else {
                for (int m : env_.static_members()) {
                    if (m != id_) {
                        view_.add(m, now);
                    }
                }
            }
            arm(TimerKind::MemberGossip, now + mp_.gossip_s, ++gen_[idx(TimerKind::MemberGossip)]);
        }
        if (pp_.table_gossip) {
            arm(TimerKind::TableGossip, now + pp_.table_gossip_s, ++gen_[idx(TimerKind::TableGossip)]);
        }
        if (holds_root) {
            const auto r = tree_.root();
            pool_.insert({ProblemCode::root(), r, tree_.node(r).bound});
        }
        ensure_progress(now);
    }

    void deliver(Message msg, double now) {
        if (status_ != WorkerStatus::Running) {
            return;
        }
        if (busy_) {
            inbox_.emplace_back(std::move(msg));
            return;
        }
        handle_message(msg, now);
        post_step(now);
    }

    void timer(TimerKind kind, std::uint64_t gen, double now) {
        if (status_ != WorkerStatus::Running) {
            return;
        }
        if (kind == TimerKind::ComputeDone) {
            if (gen == gen_[idx(kind)]) {
                boundary(now);
            }
            return;
        }
        if (busy_) {
            inbox_.emplace_back(TimerFire{kind, gen});
            return;
        }
        handle_timer(kind, gen, now);
        post_step(now);
    }

    void crash(double now) {
        if (status_ == WorkerStatus::Crashed || status_ == WorkerStatus::Terminated) {
            return;
        }
        close_idle(now);
        status_ = WorkerStatus::Crashed;
        ended_at_ = now;
    }

    /// Called once at the end of a run for processes still running
    /// (timeout outcome): closes the bookkeeping interval.
    void finish_bookkeeping(double now) {
        if (status_ == WorkerStatus::Running) {
            close_idle(now);
            ended_at_ = now;
        }
    }

private:
    struct TimerFire {
        TimerKind kind;
        std::uint64_t gen;
    };
    using InboxItem = std::variant<Message, TimerFire>;

    static constexpr int idx(TimerKind k) { return static_cast<int>(k); }

    void arm(TimerKind kind, double at, std::uint64_t gen) { env_.arm_timer(id_, at, kind, gen); }

    void close_idle(double now) {
        if (idle_since_ >= 0.0) {
            counters_.idle_time += now - idle_since_;
            idle_since_ = -1.0;
        }
    }

    std::vector<int> members_except_self() const {
        if (mp_.enabled) {
            return view_.others();
        }
        std::vector<int> out;
        for (int m : env_.static_members()) {
            if (m != id_) {
                out.push_back(m);
            }
        }
        return out;
    }

    std::vector<int> pick_targets(std::size_t k) {
        std::vector<int> others = members_except_self();
        if (others.size() <= k) {
            return others;
        }
        // Partial Fisher-Yates on the sorted candidate list.
        auto& rng = env_.target_rng(id_);
        for (std::size_t i = 0; i < k; ++i) {
            const std::size_t j = i + uniform_index(rng, others.size() - i);
            std::swap(others[i], others[j]);
        }
        others.resize(k);
        return others;
    }

    bool is_covered_local(const ProblemCode& code) const {
        return table_.covers(code) || list_.covers(code);
    }

    // Contraction cost is charged where it lands on the timeline: while
    // idle it consumes the current idle gap, otherwise it delays the next
    // compute. The counter only records consumed time, so
    // bnb + contraction + idle never exceeds wall time.
    void charge_contraction(std::size_t touched, double now) {
        const double dt = pp_.contraction_cost_s * static_cast<double>(touched);
        if (idle_since_ >= 0.0) {
            const double consumed = std::min(dt, now - idle_since_);
            counters_.contraction_time += consumed;
            idle_since_ += consumed;
        } else {
            pending_overhead_ += dt;
        }
    }

    void sample_storage() { env_.storage_sample(id_, table_.bytes() + list_.bytes()); }

    void update_best(double v, int from, double now) {
        if (best_.update(v, from)) {
            env_.on_best(id_, v, now);
        }
    }

    // -- compute ------------------------------------------------------------

    void ensure_progress(double now) {
        if (status_ != WorkerStatus::Running || busy_) {
            return;
        }
        if (!pool_.empty()) {
            start_compute(now);
            return;
        }
        if (idle_since_ < 0.0) {
            idle_since_ = now;
        }
        if (!request_outstanding_) {
            issue_request(now);
        }
    }

    void start_compute(double now) {
        close_idle(now);
        current_ = pool_.pop_next();
        const double overhead = pending_overhead_;
        pending_overhead_ = 0.0;
        counters_.contraction_time += overhead;  // consumed: it delays this node
        const double duration = overhead + tree_.node(current_->node).time_cost;
        busy_ = true;
        busy_until_ = now + duration;
        env_.on_compute(id_, current_->node, current_->code, duration, now);
        arm(TimerKind::ComputeDone, busy_until_, ++gen_[idx(TimerKind::ComputeDone)]);
    }

    void boundary(double now) {
        busy_ = false;
        finish_node(now);
        current_.reset();
        while (!inbox_.empty() && status_ == WorkerStatus::Running) {
            InboxItem item = std::move(inbox_.front());
            inbox_.pop_front();
            if (auto* msg = std::get_if<Message>(&item)) {
                handle_message(*msg, now);
            } else {
                const auto& tf = std::get<TimerFire>(item);
                handle_timer(tf.kind, tf.gen, now);
            }
        }
        post_step(now);
    }

    void finish_node(double now) {
        const auto& n = tree_.node(current_->node);
        counters_.bnb_time += n.time_cost;
        ++counters_.nodes_expanded;
        env_.on_expand(id_, current_->node, now);
        if (n.feasible) {
            update_best(n.bound, id_, now);
        }
        const ProblemCode& code = current_->code;
        if (n.child[0] == -1) {
            complete(code, now);  // leaf: fathomed
            return;
        }
        if (pp_.pruning && eliminate_check(n.bound, best_)) {
            complete(code, now);  // eliminated: treated as a completed leaf
            return;
        }
        solved_marks_.insert(code);
        for (int b = 0; b < 2; ++b) {
            const std::int32_t ci = n.child[b];
            const auto& c = tree_.node(ci);
            ProblemCode ccode = code.child(static_cast<std::uint32_t>(c.branch_var), b);
            if (is_covered_local(ccode)) {
                continue;  // someone else already completed this subtree
            }
            if (pp_.pruning && eliminate_check(c.bound, best_)) {
                complete(ccode, now);
            } else {
                pool_.insert({std::move(ccode), ci, c.bound});
            }
        }
    }

    void complete(const ProblemCode& code, double now) {
        last_completed_ = code;
        env_.on_complete(id_, code, now);
        charge_contraction(list_.insert(code), now);
        list_updated_at_ = now;
        arm(TimerKind::ReportFlush, now + pp_.report_timeout_s, ++gen_[idx(TimerKind::ReportFlush)]);
        sample_storage();
    }

    // -- messaging ----------------------------------------------------------

    void handle_message(const Message& msg, double now) {
        switch (msg.kind) {
            case MsgKind::WorkRequest:
                answer_request(msg.sender, msg.req_id, now);
                break;
            case MsgKind::WorkGrant:
                if (msg.best.has_value()) {
                    update_best(*msg.best, msg.sender, now);
                }
                // Granted work is accepted even from a timed-out attempt:
                // it already left the granter's pool.
                if (request_outstanding_ && msg.req_id == current_req_id_) {
                    clear_request_state();
                    fail_count_ = 0;
                }
                accept_grant(msg, now);
                break;
            case MsgKind::WorkDenied:
                if (request_outstanding_ && msg.req_id == current_req_id_) {
                    clear_request_state();
                    if (!busy_ && pool_.empty()) {
                        request_failed(now);
                    }
                }
                break;
            case MsgKind::WorkReport:
            case MsgKind::TableGossip:
            case MsgKind::TerminationNotice:
                if (msg.best.has_value()) {
                    update_best(*msg.best, msg.sender, now);
                }
                merge_into_table(msg.codes, now);
                break;
            case MsgKind::Join:
                view_.on_join(msg.sender, now);
                break;
            case MsgKind::ViewGossip:
                first_gossip_seen_ = true;
                view_.on_view(msg.view, now);
                break;
        }
    }

    void answer_request(int requester, std::uint64_t req_id, double now) {
        Message reply;
        reply.sender = id_;
        reply.receiver = requester;
        reply.req_id = req_id;
        if (pool_.size() > static_cast<std::size_t>(pp_.min_grant_pool)) {
            const std::size_t half = (pool_.size() + 1) / 2;
            auto granted = pool_.take_from_back(half);
            reply.kind = MsgKind::WorkGrant;
            reply.best = best_.value;
            reply.codes.reserve(granted.size());
            for (auto& e : granted) {
                reply.codes.push_back(std::move(e.code));
            }
        } else {
            reply.kind = MsgKind::WorkDenied;
        }
        env_.send(std::move(reply), now);
    }

    void accept_grant(const Message& msg, double now) {
        for (const auto& code : msg.codes) {
            const std::int32_t idx_ = tree_.resolve(code);
            if (idx_ < 0) {
                throw ProtocolError("corrupt grant: unknown subproblem " + code.str());
            }
            if (is_covered_local(code)) {
                continue;
            }
            const auto& n = tree_.node(idx_);
            if (pp_.pruning && eliminate_check(n.bound, best_)) {
                complete(code, now);
            } else {
                pool_.insert({code, idx_, n.bound});
            }
        }
    }

    void merge_into_table(std::span<const ProblemCode> codes, double now) {
        if (!codes.empty()) {
            env_.on_table_merge(id_, codes, now);
            std::size_t touched = 0;
            for (const auto& c : codes) {
                touched += table_.insert(c);
            }
            charge_contraction(touched, now);
            counters_.interrupted_pool_codes += pool_.remove_covered(table_);
            sample_storage();
        }
    }

    // -- work requests and recovery -----------------------------------------

    void clear_request_state() {
        request_outstanding_ = false;
        current_req_id_ = 0;
        if (pending_requests_ > 0) {
            --pending_requests_;
        }
        ++gen_[idx(TimerKind::RequestTimeout)];  // cancel the timeout
    }

    void issue_request(double now) {
        request_outstanding_ = true;
        current_req_id_ = ++next_req_id_;
        arm(TimerKind::RequestTimeout, now + pp_.request_timeout_s, ++gen_[idx(TimerKind::RequestTimeout)]);
        const auto others = members_except_self();
        if (others.empty()) {
            // Nobody to ask: the attempt fails when the timer fires.
            return;
        }
        Message req;
        req.kind = MsgKind::WorkRequest;
        req.sender = id_;
        req.receiver = others[uniform_index(env_.target_rng(id_), others.size())];
        req.req_id = current_req_id_;
        ++pending_requests_;
        env_.send(std::move(req), now);
    }

    void request_failed(double now) {
        ++fail_count_;
        if (fail_count_ >= pp_.fail_threshold) {
            fail_count_ = 0;
            try_recovery(now);
        }
        // Retrying (or termination) is decided in post_step.
    }

    void try_recovery(double now) {
        // Publish local knowledge first: the report list may already cover
        // work the table alone would pick for recovery.
        if (!list_.empty()) {
            flush_report(now);
            if (termination_detected(table_)) {
                return;  // post_step broadcasts and halts
            }
        }
        const auto cand = select_recovery(table_, last_completed_);
        if (!cand.has_value()) {
            return;  // empty table: keep asking; root table: termination follows
        }
        const std::int32_t idx_ = tree_.resolve(*cand);
        if (idx_ < 0) {
            throw ProtocolError("recovery produced a code outside the tree: " + cand->str());
        }
        ++counters_.recoveries;
        env_.on_recover(id_, *cand, now);
        const auto& n = tree_.node(idx_);
        if (pp_.pruning && eliminate_check(n.bound, best_)) {
            complete(*cand, now);
        } else {
            pool_.insert({*cand, idx_, n.bound});
        }
    }

    // -- reporting, gossip, termination --------------------------------------

    void post_step(double now) {
        if (status_ != WorkerStatus::Running) {
            return;
        }
        maybe_emit_report(now);
        check_termination(now);
        if (status_ != WorkerStatus::Running) {
            return;
        }
        ensure_progress(now);
    }

    void maybe_emit_report(double now) {
        if (list_.empty()) {
            return;
        }
        if (list_.size() >= static_cast<std::size_t>(pp_.report_batch) ||
            now - list_updated_at_ >= pp_.report_timeout_s) {
            flush_report(now);
        }
    }

    void flush_report(double now) {
        const auto codes = list_.snapshot();
        for (int t : pick_targets(static_cast<std::size_t>(pp_.report_fanout))) {
            Message msg;
            msg.kind = MsgKind::WorkReport;
            msg.sender = id_;
            msg.receiver = t;
            msg.codes = codes;
            msg.best = best_.value;
            env_.send(std::move(msg), now);
        }
        std::size_t touched = 0;
        for (const auto& c : codes) {
            touched += table_.insert(c);
        }
        charge_contraction(touched, now);
        list_.clear();
        ++gen_[idx(TimerKind::ReportFlush)];
        counters_.interrupted_pool_codes += pool_.remove_covered(table_);
        for (auto it = solved_marks_.begin(); it != solved_marks_.end();) {
            it = table_.covers(*it) ? solved_marks_.erase(it) : std::next(it);
        }
        sample_storage();
    }

    void check_termination(double now) {
        if (status_ != WorkerStatus::Running || !termination_detected(table_)) {
            return;
        }
        // One last work report: the root code, to every member in the view.
        for (int m : members_except_self()) {
            Message msg;
            msg.kind = MsgKind::TerminationNotice;
            msg.sender = id_;
            msg.receiver = m;
            msg.codes = {ProblemCode::root()};
            msg.best = best_.value;
            env_.send(std::move(msg), now);
        }
        close_idle(now);
        status_ = WorkerStatus::Terminated;
        ended_at_ = now;
        env_.on_terminated(id_, now);
    }

    // -- timers ---------------------------------------------------------------

    void handle_timer(TimerKind kind, std::uint64_t gen, double now) {
        switch (kind) {
            case TimerKind::ComputeDone:
                break;  // handled in timer()
            case TimerKind::ReportFlush:
                if (gen == gen_[idx(kind)] && !list_.empty() &&
                    now - list_updated_at_ >= pp_.report_timeout_s - 1e-12) {
                    flush_report(now);
                }
                break;
            case TimerKind::TableGossip:
                if (gen == gen_[idx(kind)] && pp_.table_gossip) {
                    gossip_table(now);
                    arm(TimerKind::TableGossip, now + pp_.table_gossip_s, gen);
                }
                break;
            case TimerKind::RequestTimeout:
                if (gen == gen_[idx(kind)]) {
                    request_outstanding_ = false;
                    current_req_id_ = 0;  // late replies to this attempt are stale
                    if (pending_requests_ > 0) {
                        --pending_requests_;
                    }
                    if (!busy_ && pool_.empty()) {
                        request_failed(now);
                    }
                }
                break;
            case TimerKind::MemberGossip:
                if (gen == gen_[idx(kind)] && mp_.enabled) {
                    member_gossip(now);
                    arm(TimerKind::MemberGossip, now + mp_.gossip_s, gen);
                }
                break;
            case TimerKind::JoinRetry:
                if (gen == gen_[idx(kind)] && !first_gossip_seen_) {
                    send_joins(now);
                    arm(TimerKind::JoinRetry, now + mp_.join_retry_s, gen);
                }
                break;
        }
    }

    void gossip_table(double now) {
        const auto others = members_except_self();
        if (others.empty()) {
            return;
        }
        Message msg;
        msg.kind = MsgKind::TableGossip;
        msg.sender = id_;
        msg.receiver = others[uniform_index(env_.target_rng(id_), others.size())];
        msg.codes = table_.snapshot();
        msg.best = best_.value;
        env_.send(std::move(msg), now);
    }

    void member_gossip(double now) {
        view_.bump_self(now);
        view_.suspect_failures(now, mp_.fail_timeout_s);
        const auto others = view_.others();
        if (others.empty()) {
            return;
        }
        Message msg;
        msg.kind = MsgKind::ViewGossip;
        msg.sender = id_;
        msg.receiver = others[uniform_index(env_.target_rng(id_), others.size())];
        msg.view = view_.wire_entries();
        env_.send(std::move(msg), now);
    }

    void send_joins(double now) {
        for (int s : mp_.servers) {
            if (s == id_) {
                continue;
            }
            Message msg;
            msg.kind = MsgKind::Join;
            msg.sender = id_;
            msg.receiver = s;
            msg.view = {{id_, view_.heartbeat(id_)}};
            env_.send(std::move(msg), now);
        }
    }

    const int id_;
    const BasicTree& tree_;
    const ProtocolParams pp_;
    const MembershipParams mp_;
    WorkerEnv& env_;

    WorkerStatus status_ = WorkerStatus::NotStarted;
    ActivePool pool_;
    CompletedTable table_;
    CompletedTable list_;  // newly completed codes, contracted, not yet reported
    std::set<ProblemCode> solved_marks_;
    BestKnown best_;
    MembershipView view_;
    std::optional<ProblemCode> last_completed_;
    double list_updated_at_ = 0.0;

    bool busy_ = false;
    std::optional<PoolEntry> current_;
    double busy_until_ = 0.0;
    double pending_overhead_ = 0.0;

    bool request_outstanding_ = false;
    std::uint64_t current_req_id_ = 0;
    std::uint64_t next_req_id_ = 0;
    int fail_count_ = 0;
    int pending_requests_ = 0;
    bool first_gossip_seen_ = false;

    std::array<std::uint64_t, kTimerKindCount> gen_{};
    std::deque<InboxItem> inbox_;

    double started_at_ = 0.0;
    double ended_at_ = 0.0;
    double idle_since_ = -1.0;
    MetricCounters counters_;
};

}  // namespace epibb
