#include <gtest/gtest.h>

#include <random>

#include "epibb/membership.hpp"
#include "epibb/rng.hpp"

using namespace epibb;

TEST(MembershipView, HeartbeatMergeRules) {
    MembershipView v;
    v.reset(0, 0.0);
    v.on_view(std::vector<ViewEntry>{{1, 10}}, 1.0);
    ASSERT_TRUE(v.contains(1));
    EXPECT_EQ(v.heartbeat(1), 10u);

    v.on_view(std::vector<ViewEntry>{{1, 15}}, 2.0);  // larger heartbeat is fresh
    EXPECT_EQ(v.heartbeat(1), 15u);

    v.on_view(std::vector<ViewEntry>{{1, 7}}, 3.0);  // smaller one is stale
    EXPECT_EQ(v.heartbeat(1), 15u);

    v.on_view(std::vector<ViewEntry>{{9, 3}}, 4.0);  // unknown ids are adopted
    EXPECT_TRUE(v.contains(9));
}

TEST(MembershipView, SuspectFailuresByTimeout) {
    MembershipView v;
    v.reset(0, 0.0);
    v.on_view(std::vector<ViewEntry>{{1, 1}}, 10.0);
    v.on_view(std::vector<ViewEntry>{{2, 1}}, 40.0);
    const auto removed = v.suspect_failures(50.0, 30.0);
    EXPECT_EQ(removed, std::vector<int>{1});  // 50 - 10 > 30
    EXPECT_TRUE(v.contains(2));               // 50 - 40 <= 30
    EXPECT_TRUE(v.contains(0));               // self is never removed
}

TEST(MembershipView, SelfSurvivesAnyTimeout) {
    MembershipView v;
    v.reset(3, 0.0);
    const auto removed = v.suspect_failures(1e9, 1.0);
    EXPECT_TRUE(removed.empty());
    EXPECT_TRUE(v.contains(3));
}

TEST(MembershipView, JoinRefreshesLiveness) {
    MembershipView v;
    v.reset(0, 0.0);
    v.on_join(5, 1.0);
    EXPECT_TRUE(v.contains(5));
    v.on_join(5, 100.0);  // already known: refresh only
    EXPECT_TRUE(v.suspect_failures(105.0, 30.0).empty());
}

namespace {

// Round-based gossip exchange over N views bootstrapped through a gossip
// server (member 0), as joins are in the protocol. Each round every member
// bumps its heartbeat and pushes its view to one random known peer; a
// message survives with the given probability. Returns rounds until all
// views hold the full member set (or `max_rounds`).
int rounds_to_convergence(int n, double deliver_prob, std::uint64_t seed, int max_rounds,
                          int* suspicions = nullptr, double fail_timeout = 1e18) {
    std::vector<MembershipView> views(n);
    for (int i = 0; i < n; ++i) {
        views[i].reset(i, 0.0);
        if (i != 0) {
            views[i].add(0, 0.0);  // everyone knows the gossip server
        }
    }
    std::mt19937_64 rng(seed);
    int suspected = 0;
    for (int round = 1; round <= max_rounds; ++round) {
        const double now = round;
        for (int i = 0; i < n; ++i) {
            views[i].bump_self(now);
            suspected += static_cast<int>(views[i].suspect_failures(now, fail_timeout).size());
            const auto others = views[i].others();
            if (others.empty()) {
                continue;
            }
            const int target = others[uniform_index(rng, others.size())];
            if (uniform01(rng) < deliver_prob) {
                views[target].on_view(views[i].wire_entries(), now);
            }
        }
        bool converged = true;
        for (const auto& v : views) {
            converged = converged && v.size() == static_cast<std::size_t>(n);
        }
        if (converged) {
            if (suspicions != nullptr) {
                *suspicions = suspected;
            }
            return round;
        }
    }
    if (suspicions != nullptr) {
        *suspicions = suspected;
    }
    return max_rounds;
}

}  // namespace

TEST(MembershipGossip, ConvergesInBoundedRounds) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const int rounds = rounds_to_convergence(16, 1.0, seed, 200);
        EXPECT_LT(rounds, 60) << "seed " << seed;
    }
}

TEST(MembershipGossip, ToleratesModerateLoss) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const int rounds = rounds_to_convergence(12, 0.8, seed, 400);
        EXPECT_LT(rounds, 200) << "seed " << seed;
    }
}

TEST(MembershipGossip, FalseSuspicionRateDecreasesWithTimeout) {
    // Under heavy loss, short timeouts suspect live members; longer
    // timeouts suspect monotonically fewer (summed over seeds).
    long total_short = 0;
    long total_mid = 0;
    long total_long = 0;
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        int s = 0;
        rounds_to_convergence(12, 0.5, seed, 120, &s, 3.0);
        total_short += s;
        rounds_to_convergence(12, 0.5, seed, 120, &s, 10.0);
        total_mid += s;
        rounds_to_convergence(12, 0.5, seed, 120, &s, 30.0);
        total_long += s;
    }
    EXPECT_GE(total_short, total_mid);
    EXPECT_GE(total_mid, total_long);
    EXPECT_GT(total_short, 0);  // short timeouts do cause suspicions under loss
}
