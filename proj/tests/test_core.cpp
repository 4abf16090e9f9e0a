#include <gtest/gtest.h>

#include <limits>
#include <random>

#include "priorcd/benchmarks.hpp"
#include "priorcd/core.hpp"
#include "priorcd/graph_io.hpp"
#include "priorcd/notears.hpp"
#include "test_support.hpp"

using namespace priorcd;
using namespace testing_support;

TEST(AdjacencyMatrix, RejectsBadShapes) {
    EXPECT_THROW(AdjacencyMatrix::zeros(0), ContractViolation);
    EXPECT_THROW(AdjacencyMatrix::binary(Eigen::MatrixXd::Zero(2, 3)), ContractViolation);
    Eigen::MatrixXd diag = Eigen::MatrixXd::Zero(2, 2);
    diag(1, 1) = 1;
    EXPECT_THROW(AdjacencyMatrix::binary(diag), ContractViolation);
    Eigen::MatrixXd half = Eigen::MatrixXd::Zero(2, 2);
    half(0, 1) = 0.5;
    EXPECT_THROW(AdjacencyMatrix::binary(half), ContractViolation);
    EXPECT_NO_THROW(AdjacencyMatrix::weighted(half));
    EXPECT_THROW(AdjacencyMatrix::from_edges(2, {{0, 0}}), ContractViolation);
    EXPECT_THROW(AdjacencyMatrix::from_edges(2, {{0, 2}}), ContractViolation);
}

TEST(AdjacencyMatrix, EdgesAreRowMajor) {
    auto m = AdjacencyMatrix::from_edges(3, {{2, 0}, {0, 1}, {1, 2}});
    std::vector<Edge> expect{{0, 1}, {1, 2}, {2, 0}};
    EXPECT_EQ(m.edges(), expect);
    EXPECT_EQ(m.edge_count(), 3u);
    EXPECT_TRUE(m.has_edge(2, 0));
    EXPECT_FALSE(m.with_edge(2, 0, false).has_edge(2, 0));
}

TEST(IsAcyclic, Examples) {
    EXPECT_TRUE(is_acyclic(AdjacencyMatrix::zeros(2)));
    EXPECT_FALSE(is_acyclic(AdjacencyMatrix::from_edges(2, {{0, 1}, {1, 0}})));
    const auto asia = load_ground_truth("asia");
    EXPECT_EQ(asia.adjacency.size(), 8u);
    EXPECT_EQ(asia.adjacency.edge_count(), 8u);
    EXPECT_TRUE(is_acyclic(asia.adjacency));
}

TEST(IsAcyclic, NonBinaryIsContractViolation) {
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(2, 2);
    w(0, 1) = 0.7;
    EXPECT_THROW(is_acyclic(AdjacencyMatrix::weighted(w)), ContractViolation);
}

TEST(IsAcyclic, AgreesWithTopologicalOrderAndTraceExp) {
    // every binary matrix for d <= 3
    for (Index d = 1; d <= 3; ++d) {
        std::vector<Edge> cells;
        for (Index i = 0; i < d; ++i)
            for (Index j = 0; j < d; ++j)
                if (i != j) cells.emplace_back(i, j);
        for (std::uint64_t pat = 0; pat < (1ull << cells.size()); ++pat) {
            std::vector<Edge> e;
            for (Index k = 0; k < cells.size(); ++k)
                if (pat >> k & 1) e.push_back(cells[k]);
            const auto m = AdjacencyMatrix::from_edges(d, e);
            bool sorted = true;
            try {
                topological_order(m);
            } catch (const ContractViolation&) {
                sorted = false;
            }
            const double h = notears::h_acyclicity(m.values()).value;
            EXPECT_EQ(is_acyclic(m), sorted);
            EXPECT_EQ(is_acyclic(m), h <= 1e-8) << "d=" << d << " pattern=" << pat;
        }
    }
}

TEST(IsAcyclic, RandomGraphsUpToSixAgreeWithTraceExp) {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 300; ++t) {
        const Index d = 4 + t % 3;
        const auto m = random_binary(d, 0.25, rng);
        EXPECT_EQ(is_acyclic(m), notears::h_acyclicity(m.values()).value <= 1e-8);
    }
}

TEST(TopologicalOrder, ParentsComeFirst) {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 50; ++t) {
        const auto g = random_dag(7, 0.4, rng);
        const auto order = topological_order(g);
        std::vector<Index> pos(7);
        for (Index k = 0; k < order.size(); ++k) pos[order[k]] = k;
        for (const auto& [i, j] : g.edges()) EXPECT_LT(pos[i], pos[j]);
    }
}

TEST(Threshold, Examples) {
    std::mt19937_64 rng(5);
    const auto b = random_binary(4, 0.5, rng);
    EXPECT_EQ(threshold(b, std::numeric_limits<double>::infinity()), AdjacencyMatrix::zeros(4));
    EXPECT_EQ(threshold(b, 0.5), b);

    Eigen::MatrixXd w(2, 2);
    w << 0, 0.9, 0.05, 0;
    EXPECT_EQ(threshold(AdjacencyMatrix::weighted(w), 0.3), AdjacencyMatrix::from_edges(2, {{0, 1}}));
    EXPECT_THROW(threshold(b, -1.0), ContractViolation);
}

TEST(Threshold, NegativeWeightsUseMagnitude) {
    Eigen::MatrixXd w(2, 2);
    w << 0, -0.9, 0.3, 0;
    EXPECT_EQ(threshold(AdjacencyMatrix::weighted(w), 0.3), AdjacencyMatrix::from_edges(2, {{0, 1}}));
}

TEST(Threshold, Idempotent) {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> z;
    for (int t = 0; t < 100; ++t) {
        Eigen::MatrixXd w(5, 5);
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 5; ++j) w(i, j) = i == j ? 0.0 : z(rng);
        for (double tau : {0.0, 0.3, 0.99}) {
            const auto once = threshold(AdjacencyMatrix::weighted(w), tau);
            EXPECT_EQ(threshold(once, tau), once);
        }
    }
}

TEST(ParentSet, Examples) {
    EXPECT_TRUE(parent_set(AdjacencyMatrix::zeros(3), 1).empty());
    EXPECT_EQ(parent_set(AdjacencyMatrix::from_edges(3, {{0, 2}}), 2), std::vector<Index>{0});
    EXPECT_THROW(parent_set(AdjacencyMatrix::zeros(3), 3), ContractViolation);

    const auto asia = load_ground_truth("asia");
    auto idx = [&](const std::string& n) {
        return static_cast<Index>(std::find(asia.variables.begin(), asia.variables.end(), n) - asia.variables.begin());
    };
    const auto pa = parent_set(asia.adjacency, idx("dysp"));
    EXPECT_EQ(pa, (std::vector<Index>{idx("bronc"), idx("either")}));
}

TEST(ParentSet, RoundTrip) {
    std::mt19937_64 rng(13);
    for (int t = 0; t < 100; ++t) {
        const auto m = random_binary(6, 0.3, rng);
        std::vector<std::vector<Index>> parents;
        for (Index j = 0; j < 6; ++j) parents.push_back(parent_set(m, j));
        EXPECT_EQ(from_parent_sets(parents), m);
    }
}

TEST(Permuted, MovesEdgesWithVariables) {
    const auto m = AdjacencyMatrix::from_edges(3, {{0, 1}, {1, 2}});
    const auto p = m.permuted({2, 0, 1});  // new 0 = old 2, new 1 = old 0, new 2 = old 1
    EXPECT_EQ(p, AdjacencyMatrix::from_edges(3, {{1, 2}, {2, 0}}));
}

TEST(Dataset, Validates) {
    Eigen::MatrixXd x(2, 2);
    x << 0, 1.5, 1, 2.0;
    EXPECT_NO_THROW(Dataset(x, {VariableMeta::discrete("a", {"n", "y"}), VariableMeta::continuous("b")}));
    EXPECT_THROW(Dataset(x, {VariableMeta::discrete("a", {"n"}), VariableMeta::continuous("b")}), ContractViolation);
    EXPECT_THROW(Dataset(x, {VariableMeta::continuous("a"), VariableMeta::continuous("a")}), ContractViolation);
    EXPECT_THROW(Dataset(x, {VariableMeta::continuous(""), VariableMeta::continuous("b")}), ContractViolation);
    EXPECT_THROW(Dataset(x, {VariableMeta::discrete("a", {}), VariableMeta::continuous("b")}), ContractViolation);
    EXPECT_THROW(Dataset(x, {VariableMeta::continuous("a")}), DimensionMismatch);
    x(0, 1) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(Dataset(x, {VariableMeta::continuous("a"), VariableMeta::continuous("b")}), ContractViolation);
}

TEST(GraphIo, JsonRoundTrip) {
    std::mt19937_64 rng(17);
    const auto m = random_binary(5, 0.4, rng);
    const auto doc = graph_to_json(names(5), m);
    const auto g = graph_from_json(nlohmann::json::parse(doc.dump()));
    EXPECT_EQ(g.variables, names(5));
    EXPECT_EQ(g.adjacency, m);
}

TEST(GraphIo, JsonErrors) {
    EXPECT_THROW(graph_from_json(nlohmann::json::parse(R"({"edges": []})")), ParseError);
    EXPECT_THROW(graph_from_json(nlohmann::json::parse(R"({"variables": ["a"], "edges": [["a"]]})")), ParseError);
    EXPECT_THROW(graph_from_json(nlohmann::json::parse(R"({"variables": ["a", "a"]})")), ParseError);
    EXPECT_THROW(graph_from_json(nlohmann::json::parse(R"({"variables": ["a"], "edges": [["a", "b"]]})")),
                 ContractViolation);
    EXPECT_THROW(parse_json("{not json", "x"), ParseError);
}

TEST(GraphIo, CsvRoundTrip) {
    std::mt19937_64 rng(19);
    const auto m = random_binary(4, 0.5, rng);
    const auto g = graph_from_csv(graph_to_csv(names(4), m));
    EXPECT_EQ(g.variables, names(4));
    EXPECT_EQ(g.adjacency, m);

    Eigen::MatrixXd w(2, 2);
    w << 0, 0.25, -1.5, 0;
    const auto gw = graph_from_csv(graph_to_csv({"a", "b"}, AdjacencyMatrix::weighted(w)));
    EXPECT_FALSE(gw.adjacency.is_binary());
    EXPECT_EQ(gw.adjacency.values(), w);
}

TEST(GraphIo, AlignReordersAndChecksNames) {
    NamedGraph g{{"a", "b", "c"}, AdjacencyMatrix::from_edges(3, {{0, 1}})};
    EXPECT_EQ(align_graph(g, {"c", "b", "a"}), AdjacencyMatrix::from_edges(3, {{2, 1}}));
    EXPECT_THROW(align_graph(g, {"a", "b"}), DimensionMismatch);
    EXPECT_THROW(align_graph(g, {"a", "b", "z"}), DimensionMismatch);
}

TEST(CsvSplit, HandlesQuotes) {
    EXPECT_EQ(split_csv_line(R"(a,"b,c","d""e")"), (std::vector<std::string>{"a", "b,c", "d\"e"}));
    EXPECT_EQ(split_csv_line("x,,y\r"), (std::vector<std::string>{"x", "", "y"}));
}
