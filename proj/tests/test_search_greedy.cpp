#include <gtest/gtest.h>

#include <array>
#include <random>
#include <set>
#include <tuple>

#include "priorcd/benchmarks.hpp"
#include "priorcd/metrics.hpp"
#include "priorcd/search_greedy.hpp"
#include "test_support.hpp"

using namespace priorcd;
using namespace testing_support;

namespace {

const ScoreConfig kPlain{0.0, PenaltyKind::None, Likelihood::GaussianLinear};

Dataset linear_pair(Index n, double coef, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    Eigen::MatrixXd x(n, 2);
    for (Index r = 0; r < n; ++r) {
        x(r, 0) = z(rng);
        x(r, 1) = coef * x(r, 0) + z(rng);
    }
    return Dataset(x, {VariableMeta::continuous("x"), VariableMeta::continuous("y")});
}

/// n x 3 data from explicit structural equations.
template <typename F>
Dataset three(Index n, std::uint64_t seed, F eq) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    Eigen::MatrixXd x(n, 3);
    for (Index r = 0; r < n; ++r) {
        const auto v = eq(z(rng), z(rng), z(rng));
        x(r, 0) = v[0];
        x(r, 1) = v[1];
        x(r, 2) = v[2];
    }
    return Dataset(x, {VariableMeta::continuous("a"), VariableMeta::continuous("b"), VariableMeta::continuous("c")});
}

bool markov_equivalent(const AdjacencyMatrix& a, const AdjacencyMatrix& b) {
    // same skeleton and same v-structures
    const Index d = a.size();
    for (Index i = 0; i < d; ++i)
        for (Index j = 0; j < d; ++j)
            if ((a.has_edge(i, j) || a.has_edge(j, i)) != (b.has_edge(i, j) || b.has_edge(j, i))) return false;
    auto vstructs = [d](const AdjacencyMatrix& g) {
        std::set<std::tuple<Index, Index, Index>> out;
        for (Index c = 0; c < d; ++c)
            for (Index i = 0; i < d; ++i)
                for (Index j = i + 1; j < d; ++j)
                    if (g.has_edge(i, c) && g.has_edge(j, c) && !g.has_edge(i, j) && !g.has_edge(j, i))
                        out.insert({i, j, c});
        return out;
    };
    return vstructs(a) == vstructs(b);
}

}  // namespace

TEST(GreedySearch, RecoversSingleEdge) {
    const auto data = linear_pair(2000, 3.0, 1);
    const auto r = greedy_search(data, nullptr, kPlain, {});
    EXPECT_EQ(r.adjacency, AdjacencyMatrix::from_edges(2, {{0, 1}}));
    // enumeration of the 3 DAGs: both single-edge graphs beat the empty one
    const double empty = bic_total(data, AdjacencyMatrix::zeros(2), Likelihood::GaussianLinear);
    const double fwd = bic_total(data, AdjacencyMatrix::from_edges(2, {{0, 1}}), Likelihood::GaussianLinear);
    const double bwd = bic_total(data, AdjacencyMatrix::from_edges(2, {{1, 0}}), Likelihood::GaussianLinear);
    EXPECT_LT(fwd, empty);
    EXPECT_NEAR(fwd, bwd, 1e-8 * std::abs(fwd));
    EXPECT_NEAR(r.final_score, fwd, 1e-9);
}

TEST(GreedySearch, ZeroLambdaMatchesNoPenaltyBitForBit) {
    std::mt19937_64 rng(2);
    const auto data = gaussian_data(random_dag(6, 0.4, rng), 500, rng);
    const auto e = random_ensemble(6, 2, rng);
    const auto a = greedy_search(data, &e, {0.0, PenaltyKind::L1, Likelihood::GaussianLinear}, {});
    const auto b = greedy_search(data, &e, {0.0, PenaltyKind::None, Likelihood::GaussianLinear}, {});
    const auto c = greedy_search(data, nullptr, kPlain, {});
    EXPECT_EQ(a.adjacency, b.adjacency);
    EXPECT_EQ(a.final_score, b.final_score);
    EXPECT_EQ(a.adjacency, c.adjacency);
    ASSERT_EQ(a.trace.size(), c.trace.size());
    for (std::size_t k = 0; k < a.trace.size(); ++k) {
        EXPECT_EQ(a.trace[k].op, c.trace[k].op);
        EXPECT_EQ(a.trace[k].score, c.trace[k].score);
    }
}

TEST(GreedySearch, PerfectPriorWithLargeLambdaOnAsia) {
    const auto net = load_network("asia");
    const auto data = forward_sample(net, 5000, 3);
    const auto prior = PriorEnsemble::single(PriorGraph("gpt-4-style", net.names(), net.adjacency));
    const auto r = greedy_search(data, &prior, {10.0 * 5000, PenaltyKind::L1, Likelihood::DiscreteMultinomial}, {});
    EXPECT_EQ(r.adjacency, net.adjacency);
    const auto report = evaluate(r.adjacency, ground_truth(net));
    EXPECT_EQ(report.shd, 0u);
    EXPECT_EQ(report.tpr, 1.0);
}

TEST(GreedySearch, DimensionMismatchAndPreconditions) {
    const auto data = linear_pair(10, 1.0, 4);
    const auto e = PriorEnsemble::single(prior_of(AdjacencyMatrix::zeros(3)));
    EXPECT_THROW(greedy_search(data, &e, {1.0, PenaltyKind::L1, Likelihood::GaussianLinear}, {}), DimensionMismatch);
    SearchConfig none;
    none.operators.clear();
    EXPECT_THROW(greedy_search(data, nullptr, kPlain, none), ContractViolation);
    Eigen::MatrixXd one(1, 2);
    one << 1, 2;
    EXPECT_THROW(greedy_search(Dataset(one, {VariableMeta::continuous("a"), VariableMeta::continuous("b")}), nullptr,
                               kPlain, {}),
                 ContractViolation);
}

TEST(GreedySearch, NonFiniteScoreNamesNode) {
    // multinomial likelihood on a continuous column fails with the node named
    const auto data = linear_pair(10, 1.0, 5);
    try {
        greedy_search(data, nullptr, {0.0, PenaltyKind::None, Likelihood::DiscreteMultinomial}, {});
        FAIL();
    } catch (const ContractViolation& e) {
        EXPECT_NE(std::string(e.what()).find("'x'"), std::string::npos);
    }
}

TEST(GreedySearch, TraceStrictlyDecreasingAndAcyclic) {
    std::mt19937_64 rng(6);
    for (int t = 0; t < 10; ++t) {
        const auto data = gaussian_data(random_dag(7, 0.35, rng), 400, rng);
        SearchConfig cfg;
        cfg.random_restarts = 2;
        cfg.seed = static_cast<std::uint64_t>(t);
        const auto r = greedy_search(data, nullptr, kPlain, cfg);
        EXPECT_TRUE(is_acyclic(r.adjacency));
        EXPECT_EQ(r.restarts_used, 2);
        for (std::size_t k = 1; k < r.trace.size(); ++k)
            if (r.trace[k].restart == r.trace[k - 1].restart) EXPECT_LT(r.trace[k].score, r.trace[k - 1].score);
        double best = r.trace.front().score;
        for (const auto& e : r.trace) best = std::min(best, e.score);
        EXPECT_EQ(r.final_score, best);
    }
}

TEST(GreedySearch, DeterministicForFixedSeed) {
    std::mt19937_64 rng(7);
    const auto data = gaussian_data(random_dag(6, 0.4, rng), 300, rng);
    for (auto tb : {TieBreak::LexicographicSmallest, TieBreak::FirstFound}) {
        SearchConfig cfg;
        cfg.tie_break = tb;
        cfg.random_restarts = 3;
        cfg.seed = 99;
        const auto a = greedy_search(data, nullptr, kPlain, cfg);
        const auto b = greedy_search(data, nullptr, kPlain, cfg);
        EXPECT_EQ(a.adjacency, b.adjacency);
        EXPECT_EQ(a.final_score, b.final_score);
        ASSERT_EQ(a.trace.size(), b.trace.size());
        for (std::size_t k = 0; k < a.trace.size(); ++k) EXPECT_EQ(a.trace[k].op, b.trace[k].op);
    }
}

TEST(GreedySearch, MaxIterationsBoundsMoves) {
    std::mt19937_64 rng(8);
    const auto data = gaussian_data(random_dag(6, 0.6, rng), 500, rng);
    SearchConfig cfg;
    cfg.max_iterations = 2;
    const auto r = greedy_search(data, nullptr, kPlain, cfg);
    EXPECT_LE(r.adjacency.edge_count(), 2u);
    EXPECT_LE(r.trace.size(), 3u);
}

TEST(GreedySearch, AddOnlyOperators) {
    std::mt19937_64 rng(9);
    const auto data = gaussian_data(random_dag(5, 0.5, rng), 500, rng);
    SearchConfig cfg;
    cfg.operators = {MoveKind::AddEdge};
    const auto r = greedy_search(data, nullptr, kPlain, cfg);
    for (const auto& e : r.trace) EXPECT_TRUE(e.op == "start" || e.op.rfind("add", 0) == 0) << e.op;
}

TEST(LegalMoves, KeepGraphAcyclic) {
    std::mt19937_64 rng(10);
    const SearchConfig cfg;
    for (int t = 0; t < 200; ++t) {
        const auto g = random_dag(6, 0.35, rng);
        const auto masks = parent_masks(g);
        const auto moves = legal_moves(masks, cfg);
        std::size_t expected = 0;
        for (Index i = 0; i < 6; ++i)
            for (Index j = 0; j < 6; ++j) {
                if (i == j) continue;
                for (auto kind : {MoveKind::AddEdge, MoveKind::DeleteEdge, MoveKind::ReverseEdge}) {
                    const bool present = g.has_edge(i, j);
                    if ((kind == MoveKind::AddEdge) == present) continue;
                    if (kind == MoveKind::AddEdge && g.has_edge(j, i)) continue;
                    const auto after = apply_move(masks, {kind, i, j});
                    if (detail::masks_acyclic(after)) ++expected;
                }
            }
        EXPECT_EQ(moves.size(), expected);
        for (const auto& m : moves) EXPECT_TRUE(detail::masks_acyclic(apply_move(masks, m)));
    }
}

TEST(ScoreDelta, MatchesFullRescoring) {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 100; ++t) {
        const auto data = gaussian_data(random_dag(5, 0.4, rng), 200, rng);
        const auto e = random_ensemble(5, 2, rng);
        const ScoreConfig cfg{3.0, t % 2 ? PenaltyKind::L1 : PenaltyKind::L2, Likelihood::GaussianLinear};
        AugmentedLocalScorer scorer(data, &e, cfg);
        const auto g = random_dag(5, 0.4, rng);
        const auto masks = parent_masks(g);
        const auto moves = legal_moves(masks, {});
        const auto& m = moves[rng() % moves.size()];
        const auto after = from_parent_masks(apply_move(masks, m));
        const double full = augmented_score(data, after, &e, cfg) - augmented_score(data, g, &e, cfg);
        EXPECT_NEAR(score_delta(m, masks, scorer), full, 1e-9 * std::max(1.0, std::abs(full)));
    }
}

TEST(ScoreDelta, AddThenDeleteCancels) {
    std::mt19937_64 rng(12);
    const auto data = gaussian_data(random_dag(4, 0.5, rng), 200, rng);
    AugmentedLocalScorer scorer(data, nullptr, kPlain);
    std::vector<ParentMask> empty(4, 0);
    const Move add{MoveKind::AddEdge, 1, 3};
    const auto after = apply_move(empty, add);
    EXPECT_EQ(score_delta(add, empty, scorer) + score_delta({MoveKind::DeleteEdge, 1, 3}, after, scorer), 0.0);
}

TEST(ScoreDelta, AddIsColumnLocal) {
    std::mt19937_64 rng(13);
    const auto data = gaussian_data(random_dag(5, 0.5, rng), 200, rng);
    const auto e = random_ensemble(5, 2, rng);
    AugmentedLocalScorer scorer(data, &e, {1.0, PenaltyKind::L1, Likelihood::GaussianLinear});
    std::vector<ParentMask> base(5, 0);
    const Move add{MoveKind::AddEdge, 0, 4};
    const double d0 = score_delta(add, base, scorer);
    auto other = base;
    other[1] = 0b1;
    other[2] = 0b11;
    EXPECT_EQ(score_delta(add, other, scorer), d0);
}

TEST(ExhaustiveSearch, Examples) {
    Eigen::MatrixXd one(5, 1);
    one << 1, 2, 3, 4, 5;
    const auto r = exhaustive_search(Dataset(one, {VariableMeta::continuous("a")}), nullptr, kPlain);
    EXPECT_EQ(r.adjacency, AdjacencyMatrix::zeros(1));
    EXPECT_EQ(enumerate_dags(3).size(), 25u);
    EXPECT_EQ(enumerate_dags(4).size(), 543u);
    std::mt19937_64 rng(14);
    EXPECT_THROW(exhaustive_search(gaussian_data(AdjacencyMatrix::zeros(5), 10, rng), nullptr, kPlain),
                 ContractViolation);
}

TEST(ExhaustiveSearch, ChainIsMarkovEquivalent) {
    const auto data = three(10000, 15, [](double e0, double e1, double e2) {
        const double a = e0, b = 0.8 * a + e1, c = -0.9 * b + e2;
        return std::array<double, 3>{a, b, c};
    });
    const auto r = exhaustive_search(data, nullptr, kPlain);
    EXPECT_TRUE(markov_equivalent(r.adjacency, AdjacencyMatrix::from_edges(3, {{0, 1}, {1, 2}})));
}

TEST(ExhaustiveSearch, HugeLambdaReturnsPrior) {
    const auto data = three(2000, 16, [](double e0, double e1, double e2) {
        return std::array<double, 3>{e0, e0 + e1, e1 + e2};
    });
    const auto prior = AdjacencyMatrix::from_edges(3, {{2, 1}, {2, 0}});
    const auto e = PriorEnsemble::single(prior_of(prior));
    EXPECT_EQ(exhaustive_search(data, &e, {1e12, PenaltyKind::L1, Likelihood::GaussianLinear}).adjacency, prior);
}

TEST(GreedyVsExhaustive, NeverBetterThanOracle) {
    std::mt19937_64 rng(17);
    for (int t = 0; t < 20; ++t) {
        const auto data = gaussian_data(random_dag(3, 0.6, rng), 300, rng);
        const auto g = greedy_search(data, nullptr, kPlain, {});
        const auto o = exhaustive_search(data, nullptr, kPlain);
        EXPECT_GE(g.final_score, o.final_score - 1e-9);
    }
}

TEST(GreedyVsExhaustive, EqualOnCuratedInstances) {
    const std::vector<Dataset> cases{
        three(5000, 18, [](double e0, double e1, double e2) {  // chain
            const double a = e0, b = 0.8 * a + e1;
            return std::array<double, 3>{a, b, -0.9 * b + e2};
        }),
        three(5000, 19, [](double e0, double e1, double e2) {  // fork
            const double b = e1;
            return std::array<double, 3>{1.1 * b + e0, b, 0.7 * b + e2};
        }),
        three(5000, 20, [](double e0, double e1, double e2) {  // collider
            return std::array<double, 3>{e0, e1, e0 - e1 + 0.5 * e2};
        })};
    for (const auto& data : cases) {
        const auto g = greedy_search(data, nullptr, kPlain, {});
        const auto o = exhaustive_search(data, nullptr, kPlain);
        EXPECT_NEAR(g.final_score, o.final_score, 1e-9 * std::abs(o.final_score));
    }
}

TEST(GreedySearch, PriorInfluenceMonotoneInLambda) {
    std::mt19937_64 rng(21);
    for (int t = 0; t < 5; ++t) {
        const auto data = gaussian_data(random_dag(6, 0.4, rng), 500, rng);
        const auto prior = random_dag(6, 0.3, rng);
        const auto e = PriorEnsemble::single(prior_of(prior));
        Index last = std::numeric_limits<Index>::max();
        for (double lambda : {0.0, 1.0, 10.0, 1e3, 1e6, 1e12}) {
            const auto r = greedy_search(data, &e, {lambda, PenaltyKind::L1, Likelihood::GaussianLinear}, {});
            const Index h = hamming_distance(r.adjacency, prior);
            EXPECT_LE(h, last) << "lambda=" << lambda;
            last = h;
        }
        EXPECT_EQ(last, 0u);
    }
}
