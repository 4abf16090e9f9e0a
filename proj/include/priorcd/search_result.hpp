#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "priorcd/core.hpp"
#include "priorcd/graph_io.hpp"

namespace priorcd {

struct TraceEntry {
    int restart = 0;
    int iteration = 0;
    std::string op;  // "start", "add i->j", "delete i->j", "reverse i->j", "outer"
    double score = 0.0;
};

/// Per outer iteration of the continuous optimizer.
struct ContinuousIterate {
    int iteration = 0;
    double h = 0.0;
    double objective = 0.0;
    double rho = 0.0;
    double alpha = 0.0;
};

struct SearchResult {
    AdjacencyMatrix adjacency;  // binary, acyclic
    double final_score = 0.0;
    std::vector<TraceEntry> trace;
    int restarts_used = 0;

    // Continuous optimizer only.
    std::optional<Eigen::MatrixXd> weights;
    std::vector<ContinuousIterate> iterates;
    double threshold_used = 0.0;
    std::vector<std::string> warnings;
};

inline nlohmann::json to_json(const SearchResult& r, const std::vector<std::string>& variables) {
    nlohmann::json doc = graph_to_json(variables, r.adjacency);
    doc["final_score"] = r.final_score;
    doc["restarts_used"] = r.restarts_used;
    nlohmann::json trace = nlohmann::json::array();
    for (const auto& t : r.trace)
        trace.push_back({{"restart", t.restart}, {"iteration", t.iteration}, {"op", t.op}, {"score", t.score}});
    doc["trace"] = std::move(trace);
    if (r.weights) {
        doc["threshold"] = r.threshold_used;
        nlohmann::json w = nlohmann::json::array();
        for (Eigen::Index i = 0; i < r.weights->rows(); ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (Eigen::Index j = 0; j < r.weights->cols(); ++j) row.push_back((*r.weights)(i, j));
            w.push_back(std::move(row));
        }
        doc["weights"] = std::move(w);
    }
    if (!r.warnings.empty()) doc["warnings"] = r.warnings;
    return doc;
}

}  // namespace priorcd
