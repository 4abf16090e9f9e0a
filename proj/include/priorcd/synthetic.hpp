#pragma once

#include <algorithm>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "priorcd/core.hpp"

namespace priorcd {

struct LinearSem {
    AdjacencyMatrix graph;
    Eigen::MatrixXd weights;  // weights(i, j) is the coefficient of x_i in x_j
};

/// Erdos-Renyi DAG with exactly `edges` edges under a random causal order; |weights| ~ U[w_min, w_max], random sign.
inline LinearSem random_er_sem(Index d, Index edges, std::mt19937_64& rng, double w_min = 0.5, double w_max = 2.0) {
    const Index max_edges = d * (d - 1) / 2;
    if (edges > max_edges) throw ContractViolation("too many edges for a DAG on " + std::to_string(d) + " nodes");
    std::vector<Index> order(d);
    std::iota(order.begin(), order.end(), Index{0});
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<Edge> pairs;
    for (Index a = 0; a < d; ++a)
        for (Index b = a + 1; b < d; ++b) pairs.emplace_back(order[a], order[b]);
    std::shuffle(pairs.begin(), pairs.end(), rng);
    pairs.resize(edges);
    std::sort(pairs.begin(), pairs.end());

    std::uniform_real_distribution<double> magnitude(w_min, w_max);
    std::bernoulli_distribution negative(0.5);
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (const auto& [i, j] : pairs) {
        const double m = magnitude(rng);
        w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = negative(rng) ? -m : m;
    }
    return {AdjacencyMatrix::from_edges(d, pairs), std::move(w)};
}

/// x_j = sum_i w(i, j) x_i + noise_sd * N(0, 1), generated in topological order.
inline Dataset sample_linear_sem(const Eigen::MatrixXd& w, Index n, std::mt19937_64& rng, double noise_sd = 1.0) {
    const auto d = w.rows();
    const auto support = threshold(AdjacencyMatrix::weighted(w), 0.0);
    const auto order = topological_order(support);
    std::normal_distribution<double> noise(0.0, noise_sd);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), d);
    for (Index r = 0; r < n; ++r) {
        const auto row = static_cast<Eigen::Index>(r);
        for (Index j : order) {
            const auto jj = static_cast<Eigen::Index>(j);
            double v = noise(rng);
            for (Eigen::Index i = 0; i < d; ++i)
                if (w(i, jj) != 0.0) v += w(i, jj) * x(row, i);
            x(row, jj) = v;
        }
    }
    std::vector<VariableMeta> vars;
    for (Eigen::Index j = 0; j < d; ++j) vars.push_back(VariableMeta::continuous("x" + std::to_string(j)));
    return Dataset(std::move(x), std::move(vars));
}

}  // namespace priorcd
