#include <gtest/gtest.h>

#include "epibb/bnb.hpp"
#include "test_util.hpp"

using namespace epibb;
using testutil::code;

TEST(EliminateCheck, InclusiveAtEquality) {
    BestKnown best;
    best.update(10.0, 0);
    EXPECT_TRUE(eliminate_check(10.0, best));
    EXPECT_FALSE(eliminate_check(9.5, best));
    EXPECT_FALSE(eliminate_check(1e18, BestKnown{}));  // U = +inf never eliminates
}

TEST(BestKnown, StrictlyDecreasing) {
    BestKnown best;
    EXPECT_TRUE(best.update(10.0, 1));
    EXPECT_FALSE(best.update(10.0, 2));
    EXPECT_FALSE(best.update(11.0, 2));
    EXPECT_TRUE(best.update(9.0, 2));
    EXPECT_EQ(best.source, 2);
}

TEST(ActivePool, SelectionRules) {
    ActivePool dfs(SelectionRule::DepthFirst);
    dfs.insert({code("x1=0"), 1, 5.0});
    dfs.insert({code("x1=1.x2=0"), 2, 9.0});
    auto next = dfs.pop_next();
    ASSERT_TRUE(next.has_value());
    EXPECT_EQ(next->code, code("x1=1.x2=0"));  // deepest first

    ActivePool best(SelectionRule::BestFirst);
    best.insert({code("x1=0"), 1, 5.0});
    best.insert({code("x1=1.x2=0"), 2, 9.0});
    next = best.pop_next();
    ASSERT_TRUE(next.has_value());
    EXPECT_EQ(next->code, code("x1=0"));  // smallest bound first

    ActivePool empty(SelectionRule::DepthFirst);
    EXPECT_FALSE(empty.pop_next().has_value());
}

TEST(ActivePool, DeduplicatesByCode) {
    ActivePool pool(SelectionRule::DepthFirst);
    EXPECT_TRUE(pool.insert({code("x1=0"), 1, 5.0}));
    EXPECT_FALSE(pool.insert({code("x1=0"), 1, 5.0}));
    EXPECT_EQ(pool.size(), 1u);
}

TEST(ActivePool, GrantsFromTheBack) {
    // Depth-first keeps deep entries for itself and donates shallow ones.
    ActivePool pool(SelectionRule::DepthFirst);
    pool.insert({code("x1=0"), 1, 5.0});
    pool.insert({code("x1=1.x2=0"), 2, 4.0});
    pool.insert({code("x1=1.x2=1.x3=0"), 3, 3.0});
    pool.insert({code("x1=1.x2=1.x3=1.x4=0"), 4, 2.0});
    const auto granted = pool.take_from_back(2);
    ASSERT_EQ(granted.size(), 2u);
    EXPECT_EQ(granted[0].code, code("x1=0"));
    EXPECT_EQ(granted[1].code, code("x1=1.x2=0"));
    EXPECT_EQ(pool.size(), 2u);
}

TEST(ActivePool, RemoveCovered) {
    ActivePool pool(SelectionRule::DepthFirst);
    pool.insert({code("x1=0.x2=0"), 1, 5.0});
    pool.insert({code("x1=0.x2=1"), 2, 4.0});
    pool.insert({code("x1=1"), 3, 3.0});
    CompletedTable t;
    t.insert(code("x1=0"));
    EXPECT_EQ(pool.remove_covered(t), 2u);
    EXPECT_EQ(pool.size(), 1u);
}

TEST(Decompose, SpecExamples) {
    const BasicTree t = testutil::three_node_tree();
    const auto children = decompose(t, ProblemCode::root());
    ASSERT_EQ(children.size(), 2u);
    EXPECT_EQ(children[0].first, code("x1=0"));
    EXPECT_EQ(children[1].first, code("x1=1"));

    EXPECT_TRUE(decompose(t, code("x1=0")).empty());  // leaf is fathomed
    EXPECT_THROW(decompose(t, code("x9=0")), std::invalid_argument);
}

TEST(SequentialSolve, ThreeNodeTree) {
    const BasicTree t = testutil::three_node_tree();
    const SeqResult res = sequential_solve(t, SelectionRule::DepthFirst, false);
    ASSERT_TRUE(res.optimum.has_value());
    EXPECT_EQ(*res.optimum, 3.0);
    EXPECT_EQ(res.expanded, 3u);
    EXPECT_DOUBLE_EQ(res.total_time, 0.06);
}

TEST(SequentialSolve, NoPruningExpandsEverything) {
    for (std::uint64_t seed : {1, 6}) {
        const BasicTree t = gen_random_tree(seed, 401);
        const SeqResult res = sequential_solve(t, SelectionRule::DepthFirst, false);
        EXPECT_EQ(res.expanded, t.size());
        EXPECT_DOUBLE_EQ(res.total_time, t.total_time());
    }
}

TEST(SequentialSolve, PruningSoundAgainstExhaustiveOracle) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const BasicTree t = gen_random_tree(seed, 1001);
        const auto oracle = testutil::exhaustive_min(t);
        for (auto rule : {SelectionRule::DepthFirst, SelectionRule::BestFirst}) {
            const SeqResult pruned = sequential_solve(t, rule, true);
            const SeqResult full = sequential_solve(t, rule, false);
            EXPECT_EQ(pruned.optimum, oracle) << "seed " << seed;
            EXPECT_EQ(full.optimum, oracle) << "seed " << seed;
            EXPECT_LE(pruned.expanded, full.expanded);
        }
    }
}

TEST(SequentialSolve, InfeasibleTreeHasNoOptimum) {
    const BasicTree t = testutil::tree_from_text(
        "bbtree v1\n"
        "0 -1 -1 -1 1.0 0.01 0\n"
        "1 0 1 0 5.0 0.02 0\n"
        "2 0 1 1 3.0 0.03 0\n");
    const SeqResult res = sequential_solve(t, SelectionRule::DepthFirst, false);
    EXPECT_FALSE(res.optimum.has_value());
}
