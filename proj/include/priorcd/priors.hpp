#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "priorcd/core.hpp"
#include "priorcd/graph_io.hpp"

namespace priorcd {

/// One causal claim as stated by a prior source.
struct CausalStatement {
    std::string cause;
    std::string effect;
    std::string rationale;

    friend bool operator==(const CausalStatement&, const CausalStatement&) = default;
};

/**
 * A single external prior graph. The adjacency is binary with a zero
 * diagonal but may contain cycles: language models can emit contradictory
 * edges and the penalty term is defined on any binary matrix.
 */
struct PriorGraph {
    std::string source;
    std::vector<std::string> variables;
    AdjacencyMatrix adjacency;
    std::vector<CausalStatement> raw_statements;

    PriorGraph() = default;
    PriorGraph(std::string source_, std::vector<std::string> variables_, AdjacencyMatrix adjacency_,
               std::vector<CausalStatement> statements = {})
        : source(std::move(source_)),
          variables(std::move(variables_)),
          adjacency(std::move(adjacency_)),
          raw_statements(std::move(statements)) {
        adjacency.require_binary("PriorGraph");
        if (variables.size() != adjacency.size())
            throw DimensionMismatch("prior '" + source + "': variable list does not match adjacency");
    }

    Index size() const noexcept { return adjacency.size(); }

    /// Same prior re-expressed over another variable order (names must match exactly).
    PriorGraph aligned_to(const std::vector<std::string>& target) const {
        return PriorGraph(source, target, align_graph({variables, adjacency}, target, "prior '" + source + "'"),
                          raw_statements);
    }
};

/// Priors with weights mu that are nonnegative and sum to one.
class PriorEnsemble {
public:
    static constexpr double kWeightSumTolerance = 1e-12;

    PriorEnsemble(std::vector<PriorGraph> priors, std::vector<double> weights)
        : priors_(std::move(priors)), weights_(std::move(weights)) {
        if (priors_.empty()) throw ContractViolation("prior ensemble needs at least one prior");
        if (priors_.size() != weights_.size())
            throw DimensionMismatch("prior ensemble: priors and weights differ in length");
        const Index d = priors_.front().size();
        double sum = 0.0;
        for (Index k = 0; k < priors_.size(); ++k) {
            if (priors_[k].size() != d) throw DimensionMismatch("prior ensemble: priors differ in dimension");
            if (!(weights_[k] >= 0.0) || !std::isfinite(weights_[k]))
                throw ContractViolation("prior ensemble: weight for '" + priors_[k].source + "' is negative");
            sum += weights_[k];
        }
        if (std::abs(sum - 1.0) > kWeightSumTolerance)
            throw ContractViolation("prior ensemble: weights sum to " + std::to_string(sum) + ", not 1");
    }

    static PriorEnsemble single(PriorGraph prior) {
        std::vector<PriorGraph> p;
        p.push_back(std::move(prior));
        return PriorEnsemble(std::move(p), {1.0});
    }

    static PriorEnsemble uniform(std::vector<PriorGraph> priors) {
        const auto k = priors.size();
        if (k == 0) throw ContractViolation("prior ensemble needs at least one prior");
        return PriorEnsemble(std::move(priors), normalized(std::vector<double>(k, 1.0)));
    }

    Index size() const noexcept { return priors_.size(); }
    Index dimension() const noexcept { return priors_.front().size(); }
    const std::vector<PriorGraph>& priors() const noexcept { return priors_; }
    const std::vector<double>& weights() const noexcept { return weights_; }
    const PriorGraph& prior(Index k) const { return priors_.at(k); }
    double weight(Index k) const { return weights_.at(k); }

    /// Divides by the sum so the result is a probability vector.
    static std::vector<double> normalized(std::vector<double> w) {
        const double sum = std::accumulate(w.begin(), w.end(), 0.0);
        for (auto& x : w) x /= sum;
        return w;
    }

private:
    std::vector<PriorGraph> priors_;
    std::vector<double> weights_;
};

// ---------------------------------------------------------------------------
// Statement parsing

namespace detail {

inline std::string strip_list_marker(const std::string& line) {
    std::size_t k = 0;
    if (!line.empty() && (line[0] == '-' || line[0] == '*') && line.size() > 1 && line[1] == ' ') {
        k = 2;
    } else {
        while (k < line.size() && std::isdigit(static_cast<unsigned char>(line[k]))) ++k;
        if (k == 0 || k + 1 >= line.size() || (line[k] != '.' && line[k] != ')') || line[k + 1] != ' ') k = 0;
        else k += 2;
    }
    std::string rest = trim(std::string_view(line).substr(k));
    rest.erase(std::remove(rest.begin(), rest.end(), '`'), rest.end());
    return rest;
}

}  // namespace detail

struct ParsedStatements {
    std::vector<Edge> edges;                    // deduplicated, in first-seen order
    std::vector<CausalStatement> statements;    // one per accepted edge
    std::vector<std::string> skipped_lines;     // lines not in "<A> -> <B>" form
    std::vector<std::string> warnings;          // grammatical lines that were dropped
};

/**
 * Extracts `<A> -> <B>` lines (optionally followed by `: rationale`);
 * `<A> causes <B>` and leading list markers ("- ", "1. ") are tolerated.
 * Names are matched case-insensitively; unmatched lines are reported
 * rather than rejected.
 */
inline ParsedStatements parse_statements(std::string_view text, const std::vector<VariableMeta>& variables) {
    std::unordered_map<std::string, Index> by_name;
    for (Index k = 0; k < variables.size(); ++k) by_name.emplace(detail::lower(variables[k].name), k);

    ParsedStatements out;
    std::vector<bool> seen(variables.size() * variables.size(), false);
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string line = detail::trim(text.substr(pos, end - pos));
        pos = end + 1;
        line = detail::strip_list_marker(line);
        if (line.empty()) continue;

        auto arrow = line.find("->");
        std::size_t arrow_len = 2;
        if (arrow == std::string::npos) {
            // prose form "<A> causes <B>"
            const std::string low = detail::lower(line);
            arrow = low.find(" causes ");
            arrow_len = 8;
            if (arrow != std::string::npos && low.find(" causes ", arrow + 1) != std::string::npos)
                arrow = std::string::npos;
        } else if (line.find("->", arrow + 2) != std::string::npos) {
            arrow = std::string::npos;
        }
        if (arrow == std::string::npos) {
            out.skipped_lines.push_back(line);
            continue;
        }
        std::string lhs = detail::trim(std::string_view(line).substr(0, arrow));
        std::string rhs = detail::trim(std::string_view(line).substr(arrow + arrow_len));
        std::string rationale;
        if (auto colon = rhs.find(':'); colon != std::string::npos) {
            rationale = detail::trim(std::string_view(rhs).substr(colon + 1));
            rhs = detail::trim(std::string_view(rhs).substr(0, colon));
        }
        if (lhs.empty() || rhs.empty()) {
            out.skipped_lines.push_back(line);
            continue;
        }
        auto ci = by_name.find(detail::lower(lhs));
        auto ei = by_name.find(detail::lower(rhs));
        if (ci == by_name.end() || ei == by_name.end()) {
            out.warnings.push_back("dropped statement with unknown variable: " + line);
            continue;
        }
        if (ci->second == ei->second) {
            out.warnings.push_back("dropped self-loop: " + line);
            continue;
        }
        const Index cell = ci->second * variables.size() + ei->second;
        if (seen[cell]) continue;
        seen[cell] = true;
        out.edges.emplace_back(ci->second, ei->second);
        out.statements.push_back({variables[ci->second].name, variables[ei->second].name, rationale});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Prior files

inline PriorGraph prior_from_json(const nlohmann::json& doc, const std::string& origin) {
    NamedGraph g = graph_from_json(doc, origin);
    std::string source = origin;
    if (doc.contains("source")) {
        if (!doc["source"].is_string()) throw ParseError(origin + ": \"source\" must be a string");
        source = doc["source"].get<std::string>();
    }
    std::vector<CausalStatement> statements;
    for (const auto& [from, to] : g.adjacency.edges()) statements.push_back({g.variables[from], g.variables[to], {}});
    return PriorGraph(std::move(source), std::move(g.variables), std::move(g.adjacency), std::move(statements));
}

inline PriorGraph load_prior_file(const std::string& path) {
    return prior_from_json(parse_json(read_text_file(path), path), path);
}

inline nlohmann::json prior_to_json(const PriorGraph& p) {
    auto doc = graph_to_json(p.variables, p.adjacency);
    doc["source"] = p.source;
    return doc;
}

// ---------------------------------------------------------------------------
// Weights

/// Score of node `node` given an explicit parent list. Lower is better.
using LocalScoreFn = std::function<double(Index node, const std::vector<Index>& parents)>;

inline double sum_local_scores(const AdjacencyMatrix& m, const LocalScoreFn& local) {
    double total = 0.0;
    for (Index j = 0; j < m.size(); ++j) total += local(j, parent_set(m, j));
    return total;
}

namespace detail {

/// True iff `to` reaches `from` (so edge from -> to lies on a directed cycle).
inline bool on_cycle(const AdjacencyMatrix& m, Index from, Index to) {
    std::vector<bool> visited(m.size(), false);
    std::vector<Index> stack{to};
    visited[to] = true;
    while (!stack.empty()) {
        const Index v = stack.back();
        stack.pop_back();
        if (v == from) return true;
        for (Index w = 0; w < m.size(); ++w)
            if (m.has_edge(v, w) && !visited[w]) {
                visited[w] = true;
                stack.push_back(w);
            }
    }
    return false;
}

}  // namespace detail

/**
 * Breaks every directed cycle by repeatedly deleting the cycle edge whose
 * removal yields the lowest penalty-free score. Ties go to the smallest
 * (from, to) pair.
 */
inline AdjacencyMatrix repair_cycles(AdjacencyMatrix m, const LocalScoreFn& local) {
    m.require_binary("repair_cycles");
    while (!is_acyclic(m)) {
        std::optional<Edge> best;
        double best_score = std::numeric_limits<double>::infinity();
        for (const auto& [from, to] : m.edges()) {
            if (!detail::on_cycle(m, from, to)) continue;
            const auto candidate = m.with_edge(from, to, false);
            const double s = sum_local_scores(candidate, local);
            if (s < best_score) {
                best_score = s;
                best = Edge{from, to};
            }
        }
        if (!best) throw NumericalError("cycle repair could not score any candidate edge removal");
        m = m.with_edge(best->first, best->second, false);
    }
    return m;
}

/**
 * Softmin over scores with temperature equal to their population standard
 * deviation (1 when all scores coincide). Lower score gets larger weight.
 */
inline std::vector<double> softmin_weights(const std::vector<double>& scores) {
    if (scores.empty()) throw ContractViolation("softmin_weights needs at least one score");
    for (double s : scores)
        if (!std::isfinite(s)) throw NumericalError("softmin_weights: non-finite score");
    const double k = static_cast<double>(scores.size());
    const double mean = std::accumulate(scores.begin(), scores.end(), 0.0) / k;
    double var = 0.0;
    for (double s : scores) var += (s - mean) * (s - mean);
    double temperature = std::sqrt(var / k);
    if (!(temperature > 0.0)) temperature = 1.0;
    const double best = *std::min_element(scores.begin(), scores.end());
    std::vector<double> w;
    w.reserve(scores.size());
    for (double s : scores) w.push_back(std::exp(-(s - best) / temperature));
    return PriorEnsemble::normalized(std::move(w));
}

struct WeightedPriors {
    PriorEnsemble ensemble;
    std::vector<double> scores;                 // penalty-free score of each repaired prior
    std::vector<AdjacencyMatrix> scored_graphs; // the acyclic copies that were scored
};

/**
 * Scores each prior with the supplied local score (cyclic priors are scored
 * on a cycle-repaired copy) and converts the scores into softmin weights.
 * The ensemble keeps the original, possibly cyclic, adjacency matrices.
 */
inline WeightedPriors compute_weights_detailed(std::vector<PriorGraph> priors, const LocalScoreFn& local) {
    if (priors.empty()) throw ContractViolation("compute_weights needs at least one prior");
    std::vector<double> scores;
    std::vector<AdjacencyMatrix> scored;
    for (const auto& p : priors) {
        try {
            auto repaired = repair_cycles(p.adjacency, local);
            const double s = sum_local_scores(repaired, local);
            if (!std::isfinite(s)) throw NumericalError("non-finite score");
            scores.push_back(s);
            scored.push_back(std::move(repaired));
        } catch (const std::exception& e) {
            throw Error("scoring prior '" + p.source + "' failed: " + e.what());
        }
    }
    auto weights = softmin_weights(scores);
    return {PriorEnsemble(std::move(priors), std::move(weights)), std::move(scores), std::move(scored)};
}

inline PriorEnsemble compute_weights(std::vector<PriorGraph> priors, const LocalScoreFn& local) {
    return compute_weights_detailed(std::move(priors), local).ensemble;
}

}  // namespace priorcd
