#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "epibb/code.hpp"
#include "epibb/tree.hpp"
#include "test_util.hpp"

using namespace epibb;
using testutil::code;

TEST(ProblemCode, ParentDropsLastPair) {
    EXPECT_EQ(code("x1=0.x2=1").parent(), code("x1=0"));
    EXPECT_EQ(code("x7=1").parent(), ProblemCode::root());
    EXPECT_THROW(ProblemCode::root().parent(), std::invalid_argument);
}

TEST(ProblemCode, SiblingFlipsFinalBit) {
    EXPECT_EQ(code("x1=0.x2=1").sibling(), code("x1=0.x2=0"));
    EXPECT_EQ(code("x3=0").sibling(), code("x3=1"));
    EXPECT_THROW(ProblemCode::root().sibling(), std::invalid_argument);
}

TEST(ProblemCode, AncestorIsStrictPrefix) {
    EXPECT_TRUE(is_ancestor(code("x1=1"), code("x1=1.x4=0")));
    EXPECT_FALSE(is_ancestor(code("x1=1"), code("x1=1")));
    EXPECT_FALSE(is_ancestor(code("x1=0"), code("x1=1.x4=0")));
    EXPECT_TRUE(is_ancestor(ProblemCode::root(), code("x9=0")));
}

TEST(ProblemCode, CanonicalText) {
    EXPECT_EQ(code("x1=0.x2=1").str(), "x1=0.x2=1");
    EXPECT_EQ(ProblemCode::root().str(), "ROOT");
    EXPECT_EQ(ProblemCode::parse("ROOT"), ProblemCode::root());
    EXPECT_THROW(ProblemCode::parse("x1=2"), std::invalid_argument);
    EXPECT_THROW(ProblemCode::parse("x1=0."), std::invalid_argument);
    EXPECT_THROW(ProblemCode::parse("y1=0"), std::invalid_argument);
    EXPECT_THROW(ProblemCode::parse("x=0"), std::invalid_argument);
}

TEST(ProblemCode, TextRoundTripOnRandomTrees) {
    for (std::uint64_t seed : {1, 2, 3}) {
        const BasicTree tree = gen_random_tree(seed, 201);
        for (std::int32_t i = 0; i < static_cast<std::int32_t>(tree.size()); ++i) {
            const ProblemCode c = tree.code_of(i);
            EXPECT_EQ(ProblemCode::parse(c.str()), c);
        }
    }
}

namespace {

CompletedTable table_of(const std::vector<ProblemCode>& codes) { return contract(codes); }

std::vector<ProblemCode> codes_of(const CompletedTable& t) { return t.snapshot(); }

}  // namespace

TEST(Contract, SiblingsMergeToRoot) {
    const auto t = table_of({code("x1=0"), code("x1=1")});
    EXPECT_EQ(codes_of(t), std::vector<ProblemCode>{ProblemCode::root()});
    EXPECT_TRUE(termination_detected(t));
}

TEST(Contract, AncestorSubsumes) {
    const auto t = table_of({code("x1=0"), code("x1=0.x2=1")});
    EXPECT_EQ(codes_of(t), std::vector<ProblemCode>{code("x1=0")});
}

TEST(Contract, CascadingMerge) {
    const auto t = table_of({code("x1=0"), code("x1=1.x3=0"), code("x1=1.x3=1")});
    EXPECT_EQ(codes_of(t), std::vector<ProblemCode>{ProblemCode::root()});
}

TEST(Contract, DuplicatesAreDeduplicated) {
    const auto t = table_of({code("x1=0"), code("x1=0"), code("x1=0")});
    EXPECT_EQ(t.size(), 1u);
}

TEST(MergeReports, SpecExamples) {
    CompletedTable t = table_of({code("x1=0")});
    t.merge(std::vector<ProblemCode>{code("x1=1")});
    EXPECT_TRUE(termination_detected(t));

    CompletedTable root_only = table_of({ProblemCode::root()});
    root_only.merge(std::vector<ProblemCode>{code("x5=0.x6=1"), code("x9=1")});
    EXPECT_EQ(codes_of(root_only), std::vector<ProblemCode>{ProblemCode::root()});

    CompletedTable ident = table_of({code("x1=0")});
    ident.merge(std::vector<ProblemCode>{});
    EXPECT_EQ(codes_of(ident), std::vector<ProblemCode>{code("x1=0")});
}

TEST(Termination, DetectedOnlyOnRootSingleton) {
    EXPECT_TRUE(termination_detected(table_of({ProblemCode::root()})));
    EXPECT_FALSE(termination_detected(CompletedTable{}));
    EXPECT_FALSE(termination_detected(table_of({code("x1=0")})));
}

TEST(SelectRecovery, SpecExamples) {
    EXPECT_EQ(select_recovery(table_of({code("x1=0.x2=1")})), code("x1=0.x2=0"));
    EXPECT_EQ(select_recovery(table_of({ProblemCode::root()})), std::nullopt);
    EXPECT_EQ(select_recovery(CompletedTable{}), std::nullopt);
    // Deepest-code policy.
    EXPECT_EQ(select_recovery(table_of({code("x1=0"), code("x1=1.x5=1")})), code("x1=1.x5=0"));
}

TEST(SelectRecovery, LexicographicTieBreak) {
    const auto t = table_of({code("x1=1.x5=1"), code("x1=0.x2=1")});
    // Both depth 2; x1=0.x2=1 sorts first, so its sibling is chosen.
    EXPECT_EQ(select_recovery(t), code("x1=0.x2=0"));
}

TEST(SelectRecovery, PrefersLocalityOfLastCompleted) {
    const auto t = table_of({code("x1=0.x2=1"), code("x1=1.x7=0.x9=1")});
    // Without locality the deepest entry wins.
    EXPECT_EQ(select_recovery(t), code("x1=1.x7=0.x9=0"));
    // A last-completed code sharing a prefix with the shallower entry flips the choice.
    EXPECT_EQ(select_recovery(t, code("x1=0.x2=1.x3=0")), code("x1=0.x2=0"));
}

TEST(SelectRecovery, ReturnedSiblingIsNeverCovered) {
    std::mt19937_64 rng(99);
    for (int iter = 0; iter < 200; ++iter) {
        const BasicTree tree = gen_random_tree(1000 + iter % 7, 101);
        const auto codes = testutil::random_codes(tree, rng, 1 + iter % 12);
        const CompletedTable t = contract(codes);
        const auto rec = select_recovery(t);
        if (termination_detected(t) || t.empty()) {
            EXPECT_FALSE(rec.has_value());
        } else {
            ASSERT_TRUE(rec.has_value());
            EXPECT_FALSE(t.covers(*rec));
        }
    }
}

// -- contraction properties, checked against the brute-force leaf oracle ----

namespace {

void expect_contracted_invariants(const CompletedTable& t) {
    const auto codes = t.snapshot();
    for (std::size_t i = 0; i < codes.size(); ++i) {
        for (std::size_t j = 0; j < codes.size(); ++j) {
            if (i == j) {
                continue;
            }
            EXPECT_FALSE(is_ancestor(codes[i], codes[j]))
                << codes[i].str() << " subsumes " << codes[j].str();
            if (!codes[i].empty()) {
                EXPECT_NE(codes[i].sibling(), codes[j])
                    << codes[i].str() << " and " << codes[j].str() << " are siblings";
            }
        }
    }
    if (codes.size() > 1) {
        for (const auto& c : codes) {
            EXPECT_FALSE(c.empty()) << "root must only appear as a singleton";
        }
    }
}

}  // namespace

TEST(Contract, CoveragePreservedOnRandomTrees) {
    std::mt19937_64 rng(7);
    for (int iter = 0; iter < 300; ++iter) {
        const BasicTree tree = gen_random_tree(40 + iter % 11, 101);
        const auto codes = testutil::random_codes(tree, rng, 1 + iter % 20);
        const CompletedTable t = contract(codes);
        expect_contracted_invariants(t);
        EXPECT_EQ(testutil::covered_leaves(tree, codes),
                  testutil::covered_leaves(tree, t.snapshot()));
    }
}

TEST(Contract, IdempotentAndOrderInsensitive) {
    std::mt19937_64 rng(8);
    for (int iter = 0; iter < 300; ++iter) {
        const BasicTree tree = gen_random_tree(60 + iter % 5, 101);
        auto codes = testutil::random_codes(tree, rng, 2 + iter % 16);
        const CompletedTable once = contract(codes);
        const CompletedTable twice = contract(once.snapshot());
        EXPECT_EQ(once, twice);
        for (int perm = 0; perm < 4; ++perm) {
            std::shuffle(codes.begin(), codes.end(), rng);
            EXPECT_EQ(contract(codes), once);
        }
    }
}

TEST(Contract, AllLeavesCompressToRoot) {
    for (std::uint64_t seed = 1; seed <= 25; ++seed) {
        const BasicTree tree = gen_random_tree(seed, 51 + 20 * (seed % 7));
        EXPECT_TRUE(termination_detected(contract(testutil::all_leaf_codes(tree))))
            << "seed " << seed;
    }
}

TEST(CompletedTable, CoversAndByteSize) {
    CompletedTable t;
    t.insert(code("x1=0.x2=1"));
    EXPECT_TRUE(t.covers(code("x1=0.x2=1")));
    EXPECT_TRUE(t.covers(code("x1=0.x2=1.x3=0")));
    EXPECT_FALSE(t.covers(code("x1=0.x2=0")));
    EXPECT_FALSE(t.covers(code("x1=0")));
    EXPECT_EQ(t.bytes(), 16u);  // two pairs, 8 bytes each
    t.insert(code("x9=1"));
    EXPECT_EQ(t.bytes(), 24u);
}
