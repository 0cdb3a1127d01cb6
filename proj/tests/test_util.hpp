#pragma once

#include <algorithm>
#include <random>
#include <set>
#include <sstream>
#include <vector>

#include "epibb/code.hpp"
#include "epibb/tree.hpp"

namespace epibb::testutil {

inline ProblemCode code(const std::string& text) { return ProblemCode::parse(text); }

/// Brute-force coverage oracle, independent of CompletedTable: a leaf is
/// covered iff some code in the set is a prefix of (or equal to) its path.
inline std::set<std::int32_t> covered_leaves(const BasicTree& tree,
                                             const std::vector<ProblemCode>& codes) {
    std::set<std::int32_t> out;
    for (std::int32_t i = 0; i < static_cast<std::int32_t>(tree.size()); ++i) {
        if (!tree.is_leaf(i)) {
            continue;
        }
        const ProblemCode leaf = tree.code_of(i);
        for (const auto& c : codes) {
            if (c.depth() <= leaf.depth() &&
                std::equal(c.raw().begin(), c.raw().end(), leaf.raw().begin())) {
                out.insert(i);
                break;
            }
        }
    }
    return out;
}

/// Exhaustive optimum oracle: scan every node's feasible bound.
inline std::optional<double> exhaustive_min(const BasicTree& tree) {
    std::optional<double> best;
    for (const auto& n : tree.nodes()) {
        if (n.feasible && (!best.has_value() || n.bound < *best)) {
            best = n.bound;
        }
    }
    return best;
}

inline std::vector<ProblemCode> all_leaf_codes(const BasicTree& tree) {
    std::vector<ProblemCode> out;
    for (std::int32_t i = 0; i < static_cast<std::int32_t>(tree.size()); ++i) {
        if (tree.is_leaf(i)) {
            out.push_back(tree.code_of(i));
        }
    }
    return out;
}

/// Random node codes (may contain duplicates, ancestors, siblings).
inline std::vector<ProblemCode> random_codes(const BasicTree& tree, std::mt19937_64& rng,
                                             std::size_t count) {
    std::vector<ProblemCode> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        out.push_back(tree.code_of(static_cast<std::int32_t>(rng() % tree.size())));
    }
    return out;
}

inline BasicTree tree_from_text(const std::string& text) {
    std::istringstream in(text);
    return parse_basic_tree(in);
}

/// root branching on x1; leaves with bounds 5 (left, feasible) and 3
/// (right, feasible).
inline BasicTree three_node_tree() {
    return tree_from_text(
        "bbtree v1\n"
        "0 -1 -1 -1 1.0 0.01 0\n"
        "1 0 1 0 5.0 0.02 1\n"
        "2 0 1 1 3.0 0.03 1\n");
}

}  // namespace epibb::testutil
