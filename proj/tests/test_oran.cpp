#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "ppcoad/oran.hpp"

using namespace ppcoad;
using namespace ppcoad::oran;

TEST(Conflicts, AllInactiveIsEmpty) {
    Rng rng(1);
    const auto g = OranGraph::random(GraphShape{}, rng);
    EXPECT_TRUE(check_conflicts(g, OranState(g.shape())).empty());
}

TEST(Conflicts, DirectAndIndirectExamples) {
    OranGraph g(GraphShape{4, 6, 3, 0.5});
    g.set_control(1, 3);
    g.set_control(2, 3);
    OranState s(g.shape());
    s.xapp[1] = s.xapp[2] = 1;
    s.param[3] = 1;
    EXPECT_EQ(check_conflicts(g, s), (ConflictSet{true, false, false}));

    OranGraph h(GraphShape{4, 6, 3, 0.5});
    h.set_affect(4, 2);
    h.set_affect(5, 2);
    OranState t(h.shape());
    t.param[4] = t.param[5] = 1;
    EXPECT_EQ(check_conflicts(h, t), (ConflictSet{false, true, false}));

    h.set_couple(4, 5);
    EXPECT_EQ(check_conflicts(h, t), (ConflictSet{false, true, true}));
}

TEST(Conflicts, ExhaustiveSmallGraphsMatchDefinitions) {
    const GraphShape shape{3, 3, 2, 0.5};
    Rng rng(2);
    for (int graph = 0; graph < 30; ++graph) {
        const auto g = OranGraph::random(shape, rng);
        for (unsigned bits = 0; bits < (1u << 8); ++bits) {
            OranState s(shape);
            for (int i = 0; i < 3; ++i) s.xapp[i] = (bits >> i) & 1;
            for (int i = 0; i < 3; ++i) s.param[i] = (bits >> (3 + i)) & 1;
            for (int i = 0; i < 2; ++i) s.kpi[i] = (bits >> (6 + i)) & 1;
            ASSERT_EQ(check_conflicts(g, s), oracle::pairwise_conflicts(g, s)) << "graph " << graph << " state " << bits;
        }
    }
}

TEST(Generator, NominalsCleanAnomaliesExactAndTyped) {
    OranOptions opt;
    const auto ds = generate_oran(opt);
    ASSERT_EQ(ds.samples.size(), 10000u);
    std::size_t anomalies = 0;
    for (const auto& s : ds.samples) {
        const auto found = check_conflicts(ds.graph, s.state);
        ASSERT_EQ(found, oracle::pairwise_conflicts(ds.graph, s.state));
        if (s.label == Conflict::none) {
            ASSERT_TRUE(found.empty());
        } else {
            ++anomalies;
            ASSERT_TRUE(found.contains(s.label));
        }
        ASSERT_LT(s.context.id, kOranContexts);
        ASSERT_EQ(s.activity, activity(ds.graph, s.state));
    }
    EXPECT_EQ(anomalies, 1000u);
}

TEST(Generator, DirectWitnessSharesAParameter) {
    Rng rng(3);
    const auto g = OranGraph::random(GraphShape{}, rng);
    for (int i = 0; i < 200; ++i) {
        const auto s = inject_conflict(g, sample_nominal(g, rng), Conflict::direct, rng);
        bool shared = false;
        for (std::size_t a = 0; a < 10; ++a)
            for (std::size_t b = a + 1; b < 10; ++b)
                for (std::size_t p = 0; p < 15; ++p)
                    shared = shared || (s.xapp[a] && s.xapp[b] && g.controls(a, p) && g.controls(b, p));
        ASSERT_TRUE(shared);
    }
}

TEST(Generator, DeterministicPerSeed) {
    OranOptions opt;
    opt.n_samples = 500;
    const auto a = generate_oran(opt), b = generate_oran(opt);
    for (std::size_t i = 0; i < 500; ++i) ASSERT_EQ(a.samples[i].state, b.samples[i].state);
    opt.sample_seed = 99;
    const auto c = generate_oran(opt);
    bool differs = false;
    for (std::size_t i = 0; i < 500; ++i) differs = differs || !(a.samples[i].state == c.samples[i].state);
    EXPECT_TRUE(differs);
}

TEST(Generator, InfeasibleGraphIsAnError) {
    OranOptions opt;
    opt.shape = GraphShape{10, 15, 5, 0.0};
    opt.n_samples = 100;
    EXPECT_THROW(generate_oran(opt), Error);
    opt.anomaly_frac = 0.0;
    EXPECT_NO_THROW(generate_oran(opt));
}

TEST(Contexts, QuartileBinsPartitionTheRange) {
    std::vector<double> act;
    for (int i = 1; i <= 100; ++i) act.push_back(i);
    const auto q = activity_quartiles(act);
    EXPECT_EQ(q[0], 25.0);
    EXPECT_EQ(q[1], 50.0);
    EXPECT_EQ(q[2], 75.0);
    EXPECT_EQ(activity_context(1, q), ContextId{0});
    EXPECT_EQ(activity_context(24.9, q), ContextId{0});
    EXPECT_EQ(activity_context(25, q), ContextId{1});
    EXPECT_EQ(activity_context(75, q), ContextId{3});
    EXPECT_EQ(activity_context(1e9, q), ContextId{3});
}

TEST(Contexts, GeneratedSamplesUseAllFourContexts) {
    OranOptions opt;
    opt.n_samples = 3000;
    const auto ds = generate_oran(opt);
    std::vector<std::size_t> count(kOranContexts, 0);
    for (const auto& s : ds.samples) ++count[s.context.id];
    for (auto c : count) EXPECT_GT(c, 0u);
}
