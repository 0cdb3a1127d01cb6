#pragma once

#include <cstdint>
#include <deque>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "epibb/code.hpp"
#include "epibb/rng.hpp"

namespace epibb {

class TreeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One record of a precomputed search tree: the branch taken from the
/// parent, the node's bound value, the simulated cost of bounding/expanding
/// it, and whether the bound is a feasible solution.
struct BasicTreeNode {
    std::int64_t id = 0;
    std::int64_t parent_id = -1;
    std::int32_t branch_var = -1;  // -1 on the root
    std::int32_t branch_bit = -1;  // -1 on the root
    double bound = 0.0;
    double time_cost = 0.0;
    bool feasible = false;

    int line = 0;  // source line for diagnostics; 0 when generated

    // Derived structure, filled by finalize().
    std::int32_t parent_idx = -1;
    std::int32_t child[2] = {-1, -1};
    std::int32_t depth = 0;
    std::uint32_t leaf_lo = 0;  // leaves under this node form [leaf_lo, leaf_hi)
    std::uint32_t leaf_hi = 0;
};

/// Binary search tree replayed as simulator workload. Minimization sense.
class BasicTree {
public:
    void add_node(BasicTreeNode n) { nodes_.push_back(std::move(n)); }

    /// Links parents/children, checks all structural invariants, and
    /// precomputes depths and leaf intervals. Throws TreeError.
    void finalize() {
        if (nodes_.empty()) {
            throw TreeError("tree has no nodes");
        }
        index_.clear();
        index_.reserve(nodes_.size());
        root_ = -1;
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            auto& n = nodes_[i];
            if (!index_.emplace(n.id, static_cast<std::int32_t>(i)).second) {
                fail(n, "duplicate node id " + std::to_string(n.id));
            }
            n.child[0] = n.child[1] = -1;
            const bool root_marks = n.parent_id < 0 || n.branch_var < 0 || n.branch_bit < 0;
            if (root_marks) {
                if (!(n.parent_id == -1 && n.branch_var == -1 && n.branch_bit == -1)) {
                    fail(n, "root markers must all be -1");
                }
                if (root_ >= 0) {
                    fail(n, "more than one root");
                }
                root_ = static_cast<std::int32_t>(i);
            } else if (n.branch_bit > 1) {
                fail(n, "branch bit must be 0 or 1");
            }
            if (n.time_cost < 0.0) {
                fail(n, "negative time cost");
            }
        }
        if (root_ < 0) {
            throw TreeError("tree has no root");
        }
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            auto& n = nodes_[i];
            if (static_cast<std::int32_t>(i) == root_) {
                continue;
            }
            auto it = index_.find(n.parent_id);
            if (it == index_.end()) {
                fail(n, "missing parent " + std::to_string(n.parent_id));
            }
            n.parent_idx = it->second;
            auto& p = nodes_[n.parent_idx];
            if (p.child[n.branch_bit] != -1) {
                fail(n, "two children with the same branch bit under node " + std::to_string(p.id));
            }
            p.child[n.branch_bit] = static_cast<std::int32_t>(i);
        }
        for (const auto& n : nodes_) {
            const bool c0 = n.child[0] != -1;
            const bool c1 = n.child[1] != -1;
            if (c0 != c1) {
                fail(n, "node " + std::to_string(n.id) + " has exactly one child");
            }
            if (c0 && c1 && nodes_[n.child[0]].branch_var != nodes_[n.child[1]].branch_var) {
                fail(nodes_[n.child[1]], "sibling branch variables differ under node " + std::to_string(n.id));
            }
        }
        compute_structure();
    }

    std::size_t size() const { return nodes_.size(); }
    std::int32_t root() const { return root_; }
    const BasicTreeNode& node(std::int32_t idx) const { return nodes_[static_cast<std::size_t>(idx)]; }
    const std::vector<BasicTreeNode>& nodes() const { return nodes_; }
    bool is_leaf(std::int32_t idx) const { return nodes_[idx].child[0] == -1; }
    std::uint32_t leaf_count() const { return leaf_count_; }
    std::int32_t max_depth() const { return max_depth_; }

    double total_time() const { return total_time_; }
    double mean_time() const { return total_time_ / static_cast<double>(nodes_.size()); }

    /// Walks a code down from the root; -1 if the path does not exist.
    std::int32_t resolve(const ProblemCode& code) const {
        std::int32_t cur = root_;
        for (std::size_t i = 0; i < code.depth(); ++i) {
            const auto& n = nodes_[cur];
            if (n.child[0] == -1) {
                return -1;
            }
            if (nodes_[n.child[0]].branch_var != static_cast<std::int32_t>(code.var(i))) {
                return -1;
            }
            cur = n.child[code.bit(i)];
        }
        return cur;
    }

    ProblemCode code_of(std::int32_t idx) const {
        std::vector<std::uint64_t> rev;
        std::int32_t cur = idx;
        while (cur != root_) {
            const auto& n = nodes_[cur];
            rev.push_back((static_cast<std::uint64_t>(n.branch_var) << 1) | static_cast<std::uint64_t>(n.branch_bit));
            cur = n.parent_idx;
        }
        ProblemCode code;
        for (auto it = rev.rbegin(); it != rev.rend(); ++it) {
            code.push(static_cast<std::uint32_t>(*it >> 1), static_cast<int>(*it & 1));
        }
        return code;
    }

    bool same_shape_and_values(const BasicTree& other) const {
        if (nodes_.size() != other.nodes_.size()) {
            return false;
        }
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            const auto& a = nodes_[i];
            const auto& b = other.nodes_[i];
            if (a.id != b.id || a.parent_id != b.parent_id || a.branch_var != b.branch_var ||
                a.branch_bit != b.branch_bit || a.bound != b.bound || a.time_cost != b.time_cost ||
                a.feasible != b.feasible) {
                return false;
            }
        }
        return true;
    }

    void scale_time(double factor) {
        total_time_ = 0.0;
        for (auto& n : nodes_) {
            n.time_cost *= factor;
            total_time_ += n.time_cost;
        }
    }

private:
    [[noreturn]] static void fail(const BasicTreeNode& n, const std::string& msg) {
        if (n.line > 0) {
            throw TreeError("line " + std::to_string(n.line) + ": " + msg);
        }
        throw TreeError(msg);
    }

    void compute_structure() {
        // Iterative DFS: depths, leaf intervals, reachability, and the
        // no-variable-repeats-along-a-path invariant. Deep spines are
        // common in generated trees, so no recursion.
        for (auto& n : nodes_) {
            n.depth = 0;
            n.leaf_lo = n.leaf_hi = 0;
        }
        std::vector<std::int32_t> stack{root_};
        std::vector<bool> entered(nodes_.size(), false);
        std::unordered_set<std::int32_t> path_vars;
        std::uint32_t next_leaf = 0;
        std::size_t visited = 0;
        max_depth_ = 0;
        total_time_ = 0.0;
        while (!stack.empty()) {
            const std::int32_t idx = stack.back();
            auto& n = nodes_[idx];
            if (!entered[idx]) {
                entered[idx] = true;
                ++visited;
                total_time_ += n.time_cost;
                if (idx != root_) {
                    n.depth = nodes_[n.parent_idx].depth + 1;
                    max_depth_ = std::max(max_depth_, n.depth);
                }
                n.leaf_lo = next_leaf;
                if (n.child[0] == -1) {
                    ++next_leaf;
                    n.leaf_hi = next_leaf;
                    stack.pop_back();
                    continue;
                }
                if (!path_vars.insert(nodes_[n.child[0]].branch_var).second) {
                    fail(nodes_[n.child[0]], "condition variable reused along a path");
                }
                stack.push_back(n.child[0]);
            } else if (!entered[n.child[1]]) {
                stack.push_back(n.child[1]);
            } else {
                n.leaf_hi = next_leaf;
                path_vars.erase(nodes_[n.child[0]].branch_var);
                stack.pop_back();
            }
        }
        if (visited != nodes_.size()) {
            throw TreeError("tree is not connected");
        }
        leaf_count_ = next_leaf;
    }

    std::vector<BasicTreeNode> nodes_;
    std::unordered_map<std::int64_t, std::int32_t> index_;
    std::int32_t root_ = -1;
    std::uint32_t leaf_count_ = 0;
    std::int32_t max_depth_ = 0;
    double total_time_ = 0.0;
};

// ---------------------------------------------------------------------------
// File format: `bbtree v1` header, then one node per line,
//   node_id parent_id branch_var branch_bit bound time_cost feasible
// with -1 markers on the root and `#` starting a comment.

inline BasicTree parse_basic_tree(std::istream& in) {
    BasicTree tree;
    std::string line;
    int lineno = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        std::istringstream ss(line);
        if (!header_seen) {
            std::string word, ver, extra;
            if (!(ss >> word)) {
                continue;  // blank/comment line before the header
            }
            if (word != "bbtree" || !(ss >> ver) || ver != "v1" || (ss >> extra)) {
                throw TreeError("line " + std::to_string(lineno) + ": expected header 'bbtree v1'");
            }
            header_seen = true;
            continue;
        }
        BasicTreeNode n;
        int feasible = 0;
        std::string extra;
        if (!(ss >> n.id)) {
            continue;  // blank line
        }
        if (!(ss >> n.parent_id >> n.branch_var >> n.branch_bit >> n.bound >> n.time_cost >> feasible) ||
            (ss >> extra) || (feasible != 0 && feasible != 1)) {
            throw TreeError("line " + std::to_string(lineno) + ": malformed node record");
        }
        n.feasible = feasible != 0;
        n.line = lineno;
        tree.add_node(std::move(n));
    }
    if (!header_seen) {
        throw TreeError("missing 'bbtree v1' header");
    }
    tree.finalize();
    return tree;
}

inline BasicTree load_basic_tree(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw TreeError("cannot open tree file: " + path);
    }
    try {
        return parse_basic_tree(in);
    } catch (const TreeError& e) {
        throw TreeError(path + ": " + e.what());
    }
}

inline void render_basic_tree(const BasicTree& tree, std::ostream& out) {
    out << "bbtree v1\n";
    char buf[160];
    for (const auto& n : tree.nodes()) {
        std::snprintf(buf, sizeof(buf), "%lld %lld %d %d %.17g %.17g %d\n",
                      static_cast<long long>(n.id), static_cast<long long>(n.parent_id),
                      n.branch_var, n.branch_bit, n.bound, n.time_cost, n.feasible ? 1 : 0);
        out << buf;
    }
}

inline void save_basic_tree(const BasicTree& tree, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw TreeError("cannot write tree file: " + path);
    }
    render_basic_tree(tree, out);
    if (!out.flush()) {
        throw TreeError("write failed: " + path);
    }
}

// ---------------------------------------------------------------------------
// Random workload trees.

struct RandomTreeParams {
    double expand_prob = 0.45;   // expansion probability past the forced depth
    int min_forced_depth = 3;    // always branch above this depth
    double time_median_s = 0.01;  // log-normal node cost
    double time_sigma = 1.0;
    double value_lo = 0.0;  // feasible leaf values
    double value_hi = 100.0;
    double slack_lo = 0.01;  // internal bound = subtree min - slack
    double slack_hi = 5.0;
};

/// Deterministic function of (seed, target, params). Node count lands within
/// +-10% of the target or a TreeError is thrown after bounded retries.
///
/// Shape: frontier nodes expand with probability p; expansion is forced
/// above min_forced_depth and whenever the frontier would otherwise die out
/// below the target (only where p > 0, so a zero schedule still caps the
/// tree). Every branching assigns a fresh condition variable. Leaves carry
/// feasible values; internal bounds sit strictly below their subtree's best
/// feasible value, which keeps elimination sound and, with pruning off,
/// leaves the whole tree to be explored.
inline BasicTree gen_random_tree(std::uint64_t seed, std::size_t target_nodes,
                                 const RandomTreeParams& params = {}) {
    if (target_nodes < 1) {
        throw TreeError("target node count must be >= 1");
    }
    const std::size_t tolerance = target_nodes / 10;
    for (int attempt = 0; attempt < 16; ++attempt) {
        std::mt19937_64 rng(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(attempt) + 0x7ee1)));

        struct ShapeNode {
            std::int32_t parent;
            std::int32_t depth;
            std::int32_t branch_var;
            std::int8_t branch_bit;
        };
        std::vector<ShapeNode> shape;
        shape.push_back({-1, 0, -1, -1});
        std::deque<std::int32_t> frontier{0};
        std::uint32_t next_var = 0;
        while (!frontier.empty() && shape.size() < target_nodes) {
            const std::int32_t i = frontier.front();
            frontier.pop_front();
            const std::int32_t d = shape[i].depth;
            bool expand = false;
            if (params.expand_prob > 0.0) {
                if (d < params.min_forced_depth || frontier.empty()) {
                    expand = true;
                } else {
                    expand = uniform01(rng) < params.expand_prob;
                }
            }
            if (!expand) {
                continue;
            }
            const auto var = static_cast<std::int32_t>(next_var++);
            for (int b = 0; b < 2; ++b) {
                shape.push_back({i, d + 1, var, static_cast<std::int8_t>(b)});
                frontier.push_back(static_cast<std::int32_t>(shape.size()) - 1);
            }
        }
        const std::size_t n = shape.size();
        if (n + tolerance < target_nodes || n > target_nodes + tolerance) {
            continue;
        }

        std::vector<bool> internal(n, false);
        for (std::size_t i = 1; i < n; ++i) {
            internal[static_cast<std::size_t>(shape[i].parent)] = true;
        }
        // Draw order is fixed: expansion decisions above, then times in id
        // order, leaf values in id order, internal slacks in id order.
        std::vector<double> times(n);
        for (std::size_t i = 0; i < n; ++i) {
            times[i] = lognormal(rng, params.time_median_s, params.time_sigma);
        }
        std::vector<double> bound(n, std::numeric_limits<double>::infinity());
        for (std::size_t i = 0; i < n; ++i) {
            if (!internal[i]) {
                bound[i] = uniform_real(rng, params.value_lo, params.value_hi);
            }
        }
        std::vector<double> submin = bound;
        for (std::size_t r = n; r-- > 1;) {
            const auto p = static_cast<std::size_t>(shape[r].parent);
            submin[p] = std::min(submin[p], submin[r]);
        }
        // Internal bounds sit strictly below the subtree's best feasible
        // value (sound elimination) and never below the parent's bound
        // (bounds tighten along a path). Ids ascend from parent to child.
        for (std::size_t i = 0; i < n; ++i) {
            if (internal[i]) {
                double b = submin[i] - uniform_real(rng, params.slack_lo, params.slack_hi);
                if (shape[i].parent >= 0) {
                    b = std::max(b, bound[static_cast<std::size_t>(shape[i].parent)]);
                }
                bound[i] = b;
            }
        }
        BasicTree out;
        for (std::size_t i = 0; i < n; ++i) {
            BasicTreeNode node;
            node.id = static_cast<std::int64_t>(i);
            node.parent_id = shape[i].parent;
            node.branch_var = shape[i].branch_var;
            node.branch_bit = shape[i].branch_bit;
            node.bound = bound[i];
            node.feasible = !internal[i];
            node.time_cost = times[i];
            out.add_node(std::move(node));
        }
        out.finalize();
        return out;
    }
    throw TreeError("random tree target unreachable with the given expansion schedule");
}

inline BasicTree scale_granularity(const BasicTree& tree, double factor) {
    if (!(factor > 0.0)) {
        throw std::invalid_argument("granularity factor must be > 0");
    }
    BasicTree out = tree;
    out.scale_time(factor);
    return out;
}

}  // namespace epibb
