#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "priorcd/core.hpp"
#include "priorcd/priors.hpp"
#include "priorcd/scoring.hpp"
#include "priorcd/search_result.hpp"

namespace priorcd {

enum class MoveKind { AddEdge = 0, DeleteEdge = 1, ReverseEdge = 2 };
enum class TieBreak { FirstFound, LexicographicSmallest };

/// Reverse(from, to) turns the existing edge from -> to into to -> from.
struct Move {
    MoveKind kind;
    Index from;
    Index to;

    friend bool operator==(const Move&, const Move&) = default;
};

inline std::string describe(const Move& m, const std::vector<std::string>* names = nullptr) {
    const char* verb = m.kind == MoveKind::AddEdge ? "add" : m.kind == MoveKind::DeleteEdge ? "delete" : "reverse";
    auto label = [&](Index k) { return names ? (*names)[k] : std::to_string(k); };
    return std::string(verb) + " " + label(m.from) + "->" + label(m.to);
}

struct SearchConfig {
    int max_iterations = 10000;
    std::vector<MoveKind> operators{MoveKind::AddEdge, MoveKind::DeleteEdge, MoveKind::ReverseEdge};
    TieBreak tie_break = TieBreak::LexicographicSmallest;
    int random_restarts = 0;
    std::uint64_t seed = 0;
};

/// Minimum score decrease for a move to be accepted.
inline constexpr double kMinImprovement = 1e-10;
/// Relative gap below which two candidate deltas are treated as equal.
inline constexpr double kTieTolerance = 1e-9;

namespace detail {

/// desc[v] = bitmask of nodes reachable from v by a nonempty directed path.
inline std::vector<ParentMask> descendants(const std::vector<ParentMask>& parents) {
    const Index d = parents.size();
    std::vector<ParentMask> children(d, 0);
    for (Index j = 0; j < d; ++j)
        for (Index i : mask_to_parents(parents[j])) children[i] |= ParentMask{1} << j;
    std::vector<ParentMask> desc(d, 0);
    // fixed point; at most d rounds on a DAG
    for (Index round = 0; round < d; ++round) {
        bool changed = false;
        for (Index v = 0; v < d; ++v) {
            ParentMask next = children[v];
            for (Index c : mask_to_parents(children[v])) next |= desc[c];
            if (next != desc[v]) {
                desc[v] = next;
                changed = true;
            }
        }
        if (!changed) break;
    }
    return desc;
}

inline bool masks_acyclic(const std::vector<ParentMask>& parents) {
    const Index d = parents.size();
    std::vector<ParentMask> remaining = parents;
    ParentMask done = 0;
    for (Index placed = 0; placed < d; ++placed) {
        Index pick = d;
        for (Index v = 0; v < d; ++v)
            if (!(done >> v & 1u) && (remaining[v] & ~done) == 0) {
                pick = v;
                break;
            }
        if (pick == d) return false;
        done |= ParentMask{1} << pick;
    }
    return true;
}

inline bool has_operator(const SearchConfig& cfg, MoveKind k) {
    return std::find(cfg.operators.begin(), cfg.operators.end(), k) != cfg.operators.end();
}

}  // namespace detail

/// Legal single-edge moves in lexicographic (from, to, kind) order.
inline std::vector<Move> legal_moves(const std::vector<ParentMask>& parents, const SearchConfig& cfg) {
    const Index d = parents.size();
    const auto desc = detail::descendants(parents);
    const bool add = detail::has_operator(cfg, MoveKind::AddEdge);
    const bool del = detail::has_operator(cfg, MoveKind::DeleteEdge);
    const bool rev = detail::has_operator(cfg, MoveKind::ReverseEdge);
    std::vector<Move> moves;
    for (Index i = 0; i < d; ++i) {
        for (Index j = 0; j < d; ++j) {
            if (i == j) continue;
            const bool present = parents[j] >> i & 1u;
            if (!present) {
                // i -> j closes a cycle iff j already reaches i
                if (add && !(parents[i] >> j & 1u) && !(desc[j] >> i & 1u)) moves.push_back({MoveKind::AddEdge, i, j});
                continue;
            }
            if (del) moves.push_back({MoveKind::DeleteEdge, i, j});
            if (rev) {
                // j -> i closes a cycle iff i reaches j through some other child
                bool other_path = false;
                for (Index c = 0; c < d && !other_path; ++c)
                    if (c != j && (parents[c] >> i & 1u) && (desc[c] >> j & 1u)) other_path = true;
                if (!other_path) moves.push_back({MoveKind::ReverseEdge, i, j});
            }
        }
    }
    return moves;
}

inline std::vector<ParentMask> apply_move(std::vector<ParentMask> parents, const Move& m) {
    const ParentMask from_bit = ParentMask{1} << m.from;
    switch (m.kind) {
        case MoveKind::AddEdge: parents[m.to] |= from_bit; break;
        case MoveKind::DeleteEdge: parents[m.to] &= ~from_bit; break;
        case MoveKind::ReverseEdge:
            parents[m.to] &= ~from_bit;
            parents[m.from] |= ParentMask{1} << m.to;
            break;
    }
    return parents;
}

/// Exact change in augmented score; touches only the affected columns.
inline double score_delta(const Move& m, const std::vector<ParentMask>& parents, const AugmentedLocalScorer& scorer) {
    const ParentMask from_bit = ParentMask{1} << m.from;
    const ParentMask pa_to = parents[m.to];
    switch (m.kind) {
        case MoveKind::AddEdge: return scorer.local(m.to, pa_to | from_bit) - scorer.local(m.to, pa_to);
        case MoveKind::DeleteEdge: return scorer.local(m.to, pa_to & ~from_bit) - scorer.local(m.to, pa_to);
        case MoveKind::ReverseEdge: {
            const ParentMask pa_from = parents[m.from];
            return (scorer.local(m.to, pa_to & ~from_bit) - scorer.local(m.to, pa_to)) +
                   (scorer.local(m.from, pa_from | (ParentMask{1} << m.to)) - scorer.local(m.from, pa_from));
        }
    }
    return 0.0;
}

namespace detail {

inline std::vector<ParentMask> random_sparse_dag(Index d, std::mt19937_64& rng) {
    std::vector<Index> order(d);
    std::iota(order.begin(), order.end(), Index{0});
    std::shuffle(order.begin(), order.end(), rng);
    std::bernoulli_distribution coin(d > 1 ? 1.0 / static_cast<double>(d) : 0.0);
    std::vector<ParentMask> parents(d, 0);
    for (Index a = 0; a < d; ++a)
        for (Index b = a + 1; b < d; ++b)
            if (coin(rng)) parents[order[b]] |= ParentMask{1} << order[a];
    return parents;
}

struct ClimbOutcome {
    std::vector<ParentMask> parents;
    double score;
};

inline ClimbOutcome hill_climb(std::vector<ParentMask> parents, const AugmentedLocalScorer& scorer,
                               const SearchConfig& cfg, int restart, std::mt19937_64& rng,
                               std::vector<TraceEntry>& trace, const std::vector<std::string>* names) {
    double current = scorer.total(parents);
    trace.push_back({restart, 0, "start", current});
    for (int it = 1; it <= cfg.max_iterations; ++it) {
        auto moves = legal_moves(parents, cfg);
        if (cfg.tie_break == TieBreak::FirstFound) std::shuffle(moves.begin(), moves.end(), rng);
        std::optional<Move> best;
        double best_delta = -kMinImprovement;
        for (const auto& m : moves) {
            const double delta = score_delta(m, parents, scorer);
            if (!std::isfinite(delta)) throw NumericalError("non-finite score delta for move " + describe(m, names));
            // deltas equal up to rounding are ties; the earlier (lexicographic) move keeps them
            const double tie = kTieTolerance * std::max(1.0, std::abs(delta));
            if (best ? delta < best_delta - tie : delta < best_delta) {
                best_delta = delta;
                best = m;
            }
        }
        if (!best) break;
        parents = apply_move(std::move(parents), *best);
        if (!masks_acyclic(parents)) throw Error("internal: accepted move produced a cycle");
        current = scorer.total(parents);
        trace.push_back({restart, it, describe(*best, names), current});
    }
    return {std::move(parents), current};
}

}  // namespace detail

/**
 * Hill-climbing over DAGs with add/delete/reverse moves, starting from the
 * empty graph (and from random sparse DAGs for each extra restart). Each
 * iteration applies the legal move with the largest score decrease.
 */
inline SearchResult greedy_search(const Dataset& data, const PriorEnsemble* ensemble, const ScoreConfig& score_config,
                                  const SearchConfig& search_config) {
    if (data.n() < 2) throw ContractViolation("greedy_search needs at least 2 samples");
    if (search_config.operators.empty()) throw ContractViolation("greedy_search needs at least one operator");
    if (search_config.max_iterations < 1) throw ContractViolation("max_iterations must be positive");
    if (ensemble && ensemble->dimension() != data.d())
        throw DimensionMismatch("prior ensemble has d=" + std::to_string(ensemble->dimension()) +
                                " but data has d=" + std::to_string(data.d()));

    AugmentedLocalScorer scorer(data, ensemble, score_config);
    const auto names = data.names();
    std::mt19937_64 rng(search_config.seed);

    SearchResult result;
    std::optional<detail::ClimbOutcome> best;
    for (int r = 0; r <= search_config.random_restarts; ++r) {
        auto start = r == 0 ? std::vector<ParentMask>(data.d(), 0) : detail::random_sparse_dag(data.d(), rng);
        auto outcome = detail::hill_climb(std::move(start), scorer, search_config, r, rng, result.trace, &names);
        if (!best || outcome.score < best->score) best = std::move(outcome);
    }
    result.adjacency = from_parent_masks(best->parents);
    result.final_score = best->score;
    result.restarts_used = search_config.random_restarts;
    return result;
}

inline constexpr Index kMaxExhaustiveVariables = 4;

/// Every acyclic binary matrix over d nodes, in increasing bit-pattern order.
inline std::vector<AdjacencyMatrix> enumerate_dags(Index d) {
    if (d == 0 || d > kMaxExhaustiveVariables) throw ContractViolation("enumerate_dags supports 1 <= d <= 4");
    std::vector<Edge> cells;
    for (Index i = 0; i < d; ++i)
        for (Index j = 0; j < d; ++j)
            if (i != j) cells.emplace_back(i, j);
    std::vector<AdjacencyMatrix> out;
    for (std::uint64_t pattern = 0; pattern < (std::uint64_t{1} << cells.size()); ++pattern) {
        std::vector<ParentMask> parents(d, 0);
        for (Index k = 0; k < cells.size(); ++k)
            if (pattern >> k & 1u) parents[cells[k].second] |= ParentMask{1} << cells[k].first;
        if (detail::masks_acyclic(parents)) out.push_back(from_parent_masks(parents));
    }
    return out;
}

/// Global argmin of the augmented score by enumeration (d <= 4, at most 543 DAGs).
inline SearchResult exhaustive_search(const Dataset& data, const PriorEnsemble* ensemble,
                                      const ScoreConfig& score_config) {
    if (data.d() > kMaxExhaustiveVariables)
        throw ContractViolation("exhaustive_search supports at most 4 variables, got " + std::to_string(data.d()));
    AugmentedLocalScorer scorer(data, ensemble, score_config);
    SearchResult result;
    bool first = true;
    for (auto& g : enumerate_dags(data.d())) {
        const double s = scorer.total(parent_masks(g));
        if (first || s < result.final_score) {
            result.final_score = s;
            result.adjacency = std::move(g);
            first = false;
        }
    }
    result.trace.push_back({0, 0, "exhaustive", result.final_score});
    return result;
}

}  // namespace priorcd
