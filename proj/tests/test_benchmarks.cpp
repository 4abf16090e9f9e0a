#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <cstdlib>
#include <map>

#include "priorcd/benchmarks.hpp"
#include "test_support.hpp"

using namespace priorcd;
using namespace testing_support;

TEST(LoadNetwork, BundledCounts) {
    const std::map<std::string, std::pair<Index, Index>> expect{
        {"asia", {8, 8}}, {"earthquake", {5, 4}}, {"lucas", {12, 12}}, {"child", {20, 25}}};
    for (const auto& [name, counts] : expect) {
        const auto net = load_network(name);
        EXPECT_EQ(net.size(), counts.first) << name;
        EXPECT_EQ(net.adjacency.edge_count(), counts.second) << name;
    }
    const auto sachs = load_ground_truth("sachs");
    EXPECT_EQ(sachs.variables.size(), 11u);
    EXPECT_EQ(sachs.adjacency.edge_count(), 17u);
    EXPECT_TRUE(is_acyclic(sachs.adjacency));
}

TEST(LoadNetwork, UnknownName) {
    EXPECT_THROW(load_network("alarm"), ContractViolation);
    EXPECT_THROW(load_network("sachs"), ContractViolation);
    EXPECT_THROW(load_ground_truth("nope"), ContractViolation);
}

TEST(LoadNetwork, AllAcyclicAndCptComplete) {
    for (const auto& name : bundled_network_names()) {
        const auto net = load_network(name);
        EXPECT_TRUE(is_acyclic(net.adjacency)) << name;
        for (Index j = 0; j < net.size(); ++j) {
            const auto& cpt = net.cpts[j];
            EXPECT_EQ(cpt.parents, parent_set(net.adjacency, j)) << name;
            Index configs = 1;
            for (Index k = 0; k < cpt.parents.size(); ++k) {
                EXPECT_EQ(cpt.radix[k], net.variables[cpt.parents[k]].cardinality());
                configs *= cpt.radix[k];
            }
            EXPECT_EQ(static_cast<Index>(cpt.table.rows()), configs);
            EXPECT_EQ(static_cast<Index>(cpt.table.cols()), net.variables[j].cardinality());
            for (Eigen::Index r = 0; r < cpt.table.rows(); ++r) {
                EXPECT_NEAR(cpt.table.row(r).sum(), 1.0, 1e-9);
                EXPECT_GE(cpt.table.row(r).minCoeff(), 0.0);
            }
        }
        const auto truth = ground_truth(net);
        EXPECT_EQ(load_ground_truth(name).adjacency, truth.adjacency);
    }
}

TEST(BayesNetJson, Validation) {
    const auto good = nlohmann::json::parse(R"({
        "name": "tiny",
        "variables": [{"name": "a", "categories": ["t", "f"]}, {"name": "b", "categories": ["t", "f"]}],
        "edges": [["a", "b"]],
        "cpts": {"a": {"": [0.3, 0.7]}, "b": {"t": [0.9, 0.1], "f": [0.2, 0.8]}}})");
    EXPECT_NO_THROW(bayes_net_from_json(good, "tiny"));

    auto bad_sum = good;
    bad_sum["cpts"]["a"][""] = {0.3, 0.6};
    EXPECT_THROW(bayes_net_from_json(bad_sum, "x"), Error);
    auto missing_row = good;
    missing_row["cpts"]["b"].erase("f");
    EXPECT_THROW(bayes_net_from_json(missing_row, "x"), Error);
    auto cyclic = good;
    cyclic["edges"].push_back({"b", "a"});
    EXPECT_THROW(bayes_net_from_json(cyclic, "x"), Error);
    EXPECT_THROW(bayes_net_from_json(nlohmann::json::parse("{}"), "x"), ParseError);
}

TEST(ForwardSample, SingleRow) {
    const auto net = load_network("asia");
    const auto data = forward_sample(net, 1, 3);
    EXPECT_EQ(data.n(), 1u);
    for (Index j = 0; j < data.d(); ++j) {
        const double v = data.values()(0, static_cast<Eigen::Index>(j));
        EXPECT_GE(v, 0);
        EXPECT_LT(v, static_cast<double>(data.variable(j).cardinality()));
        EXPECT_EQ(v, std::floor(v));
    }
    EXPECT_THROW(forward_sample(net, 0, 3), ContractViolation);
}

TEST(ForwardSample, DeterministicPerSeed) {
    const auto net = load_network("child");
    const auto a = forward_sample(net, 500, 42);
    const auto b = forward_sample(net, 500, 42);
    const auto c = forward_sample(net, 500, 43);
    EXPECT_EQ(a.values(), b.values());
    EXPECT_NE(a.values(), c.values());
}

TEST(ForwardSample, RareRootMarginal) {
    // Asia's visit-to-asia root has P(yes) = 0.01
    const auto net = load_network("asia");
    const Eigen::Index j = 0;
    ASSERT_EQ(net.variables[0].name, "asia");
    ASSERT_TRUE(net.cpts[0].parents.empty());
    ASSERT_DOUBLE_EQ(net.cpts[0].table(0, 0), 0.01);
    const auto data = forward_sample(net, 100000, 2024);
    const double freq = (data.values().col(j).array() == 0.0).cast<double>().mean();
    EXPECT_NEAR(freq, 0.01, 0.005);
}

TEST(ForwardSample, ConditionalsMatchCpts) {
    for (const auto& name : bundled_network_names()) {
        const auto net = load_network(name);
        const auto data = forward_sample(net, 100000, 7);
        for (Index j = 0; j < net.size(); ++j) {
            const auto& cpt = net.cpts[j];
            Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(cpt.table.rows(), cpt.table.cols());
            std::vector<Index> pv(cpt.parents.size());
            for (Index r = 0; r < data.n(); ++r) {
                for (Index k = 0; k < pv.size(); ++k)
                    pv[k] = static_cast<Index>(data.values()(static_cast<Eigen::Index>(r),
                                                             static_cast<Eigen::Index>(cpt.parents[k])));
                counts(static_cast<Eigen::Index>(cpt.configuration(pv)),
                       static_cast<Eigen::Index>(data.values()(static_cast<Eigen::Index>(r),
                                                               static_cast<Eigen::Index>(j)))) += 1;
            }
            double stat = 0.0;
            int dof = 0;
            for (Eigen::Index c = 0; c < counts.rows(); ++c) {
                const double total = counts.row(c).sum();
                int cells = 0;
                bool enough = true;
                for (Eigen::Index k = 0; k < counts.cols(); ++k) {
                    const double e = total * cpt.table(c, k);
                    if (cpt.table(c, k) == 0.0) {
                        EXPECT_EQ(counts(c, k), 0.0) << name << " node " << j;
                        continue;
                    }
                    enough &= e >= 5.0;
                    ++cells;
                }
                if (!enough || cells < 2) continue;
                for (Eigen::Index k = 0; k < counts.cols(); ++k) {
                    const double e = total * cpt.table(c, k);
                    if (e > 0) stat += (counts(c, k) - e) * (counts(c, k) - e) / e;
                }
                dof += cells - 1;
            }
            if (dof == 0) continue;
            const double p = boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), stat));
            EXPECT_GT(p, 0.001) << name << " node " << net.variables[j].name << " chi2=" << stat << " dof=" << dof;
        }
    }
}

TEST(Observations, CsvRoundTrip) {
    const auto net = load_network("earthquake");
    const auto data = forward_sample(net, 50, 1);
    const auto back = observations_from_csv(observations_to_csv(data), ground_truth(net), net.variables);
    EXPECT_EQ(back.values(), data.values());
    EXPECT_EQ(back.names(), data.names());
}

TEST(Observations, ReordersToGroundTruth) {
    GroundTruth truth{"t", AdjacencyMatrix::from_edges(3, {{0, 1}}), {"a", "b", "c"}};
    const auto data = observations_from_csv("c,a,b\n1.5,2,3\n4,5,6\n", truth);
    EXPECT_EQ(data.names(), (std::vector<std::string>{"a", "b", "c"}));
    EXPECT_EQ(data.values()(0, 0), 2.0);
    EXPECT_EQ(data.values()(1, 2), 4.0);
    EXPECT_FALSE(data.all_discrete());
}

TEST(Observations, MissingAndExtraColumns) {
    GroundTruth truth{"t", AdjacencyMatrix::zeros(3), {"a", "b", "c"}};
    try {
        observations_from_csv("a,b\n1,2\n", truth);
        FAIL() << "expected an error";
    } catch (const ContractViolation& e) {
        EXPECT_NE(std::string(e.what()).find("missing column 'c'"), std::string::npos) << e.what();
    }
    try {
        observations_from_csv("a,b,c,zz\n1,2,3,4\n", truth);
        FAIL() << "expected an error";
    } catch (const ContractViolation& e) {
        EXPECT_NE(std::string(e.what()).find("extra column 'zz'"), std::string::npos) << e.what();
    }
}

TEST(Observations, NonNumericContinuousCell) {
    const std::vector<VariableMeta> declared{VariableMeta::continuous("a"), VariableMeta::continuous("b")};
    EXPECT_THROW(observations_from_csv("a,b\n1,2\n3,oops\n", std::nullopt, declared), ParseError);
    EXPECT_THROW(observations_from_csv("a,b\n1,2\n3\n"), ParseError);
    EXPECT_THROW(observations_from_csv(""), ParseError);
    // undeclared text columns become discrete with first-appearance categories
    const auto d = observations_from_csv("a,b\n1,lo\n2,hi\n3,lo\n");
    EXPECT_TRUE(d.variable(1).is_discrete());
    EXPECT_EQ(d.variable(1).categories, (std::vector<std::string>{"lo", "hi"}));
}

TEST(Observations, SachsFileWhenAvailable) {
    const char* path = std::getenv("SACHS_CSV");
    if (!path) GTEST_SKIP() << "set SACHS_CSV to a SACHS observational CSV to run";
    const auto data = load_observations(path, load_ground_truth("sachs"));
    EXPECT_EQ(data.d(), 11u);
    EXPECT_EQ(data.n(), 853u);
}
