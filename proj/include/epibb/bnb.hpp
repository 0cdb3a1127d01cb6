#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <vector>

#include "epibb/code.hpp"
#include "epibb/tree.hpp"

namespace epibb {

enum class SelectionRule { DepthFirst, BestFirst };

inline const char* to_string(SelectionRule r) {
    return r == SelectionRule::DepthFirst ? "depth-first" : "best-first";
}

/// Incumbent: the best known feasible value, circulated between processes.
/// Updates are strictly decreasing (minimization).
struct BestKnown {
    double value = std::numeric_limits<double>::infinity();
    int source = -1;

    bool update(double v, int from) {
        if (v < value) {
            value = v;
            source = from;
            return true;
        }
        return false;
    }
};

/// Eliminate rule: a subproblem whose bound cannot beat the incumbent is
/// fathomed. The comparison is inclusive.
inline bool eliminate_check(double bound, const BestKnown& best) {
    return bound >= best.value;
}

struct PoolEntry {
    ProblemCode code;
    std::int32_t node = -1;
    double bound = 0.0;
};

/// Pool of active subproblems with a fixed selection rule.
///
/// Depth-first: longest code first, ties by code order. Best-first:
/// smallest bound first, ties by code order. Grants hand out entries from
/// the opposite end of the same order.
class ActivePool {
public:
    struct Order {
        SelectionRule rule;
        bool operator()(const PoolEntry& a, const PoolEntry& b) const {
            if (rule == SelectionRule::DepthFirst) {
                if (a.code.depth() != b.code.depth()) {
                    return a.code.depth() > b.code.depth();
                }
                return a.code < b.code;
            }
            if (a.bound != b.bound) {
                return a.bound < b.bound;
            }
            return a.code < b.code;
        }
    };

    explicit ActivePool(SelectionRule rule = SelectionRule::DepthFirst)
        : entries_(Order{rule}) {}

    bool empty() const { return entries_.empty(); }
    std::size_t size() const { return entries_.size(); }

    bool insert(PoolEntry entry) {
        if (!members_.insert(entry.code).second) {
            return false;
        }
        entries_.insert(std::move(entry));
        return true;
    }

    std::optional<PoolEntry> pop_next() {
        if (entries_.empty()) {
            return std::nullopt;
        }
        PoolEntry e = *entries_.begin();
        entries_.erase(entries_.begin());
        members_.erase(e.code);
        return e;
    }

    /// Removes the k entries the local process would select last.
    std::vector<PoolEntry> take_from_back(std::size_t k) {
        std::vector<PoolEntry> out;
        out.reserve(k);
        while (k-- > 0 && !entries_.empty()) {
            auto it = std::prev(entries_.end());
            out.push_back(*it);
            members_.erase(it->code);
            entries_.erase(it);
        }
        return out;
    }

    /// Drops entries whose code is covered by the table (work someone else
    /// already completed). Returns how many were removed.
    std::size_t remove_covered(const CompletedTable& table) {
        std::size_t removed = 0;
        for (auto it = entries_.begin(); it != entries_.end();) {
            if (table.covers(it->code)) {
                members_.erase(it->code);
                it = entries_.erase(it);
                ++removed;
            } else {
                ++it;
            }
        }
        return removed;
    }

    const std::set<PoolEntry, Order>& entries() const { return entries_; }

private:
    std::set<PoolEntry, Order> entries_;
    std::set<ProblemCode> members_;
};

/// Children of a subproblem, or empty when the node is a leaf (fathomed).
inline std::vector<std::pair<ProblemCode, std::int32_t>> decompose(const BasicTree& tree,
                                                                   const ProblemCode& code) {
    const std::int32_t idx = tree.resolve(code);
    if (idx < 0) {
        throw std::invalid_argument("unknown subproblem: " + code.str());
    }
    const auto& n = tree.node(idx);
    if (n.child[0] == -1) {
        return {};
    }
    std::vector<std::pair<ProblemCode, std::int32_t>> out;
    out.reserve(2);
    for (int b = 0; b < 2; ++b) {
        const auto& c = tree.node(n.child[b]);
        out.emplace_back(code.child(static_cast<std::uint32_t>(c.branch_var), b), n.child[b]);
    }
    return out;
}

struct SeqResult {
    std::optional<double> optimum;
    std::uint64_t expanded = 0;
    double total_time = 0.0;
};

/// Single-process reference solver; the correctness oracle for the
/// distributed runs. With pruning disabled it visits every node.
inline SeqResult sequential_solve(const BasicTree& tree, SelectionRule rule = SelectionRule::DepthFirst,
                                  bool pruning = true) {
    SeqResult res;
    BestKnown best;
    ActivePool pool(rule);
    pool.insert({ProblemCode::root(), tree.root(), tree.node(tree.root()).bound});
    while (auto entry = pool.pop_next()) {
        const auto& n = tree.node(entry->node);
        res.total_time += n.time_cost;
        ++res.expanded;
        if (n.feasible) {
            best.update(n.bound, 0);
        }
        if (n.child[0] == -1) {
            continue;
        }
        if (pruning && eliminate_check(n.bound, best)) {
            continue;
        }
        for (int b = 0; b < 2; ++b) {
            const auto& c = tree.node(n.child[b]);
            if (pruning && eliminate_check(c.bound, best)) {
                continue;
            }
            pool.insert({entry->code.child(static_cast<std::uint32_t>(c.branch_var), b), n.child[b], c.bound});
        }
    }
    if (best.value != std::numeric_limits<double>::infinity()) {
        res.optimum = best.value;
    }
    return res;
}

}  // namespace epibb
