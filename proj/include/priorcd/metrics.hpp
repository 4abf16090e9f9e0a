#pragma once

#include <sstream>
#include <string>

#include "json.hpp"

#include "priorcd/benchmarks.hpp"
#include "priorcd/core.hpp"

namespace priorcd {

struct EvalCounts {
    Index true_positives = 0;
    Index false_positives = 0;  // reversed + extra
    Index reversed = 0;
    Index missing = 0;
    Index extra = 0;

    friend bool operator==(const EvalCounts&, const EvalCounts&) = default;
};

struct EvalReport {
    Index shd = 0;
    double tpr = 0.0;
    double fdr = 0.0;
    EvalCounts counts;
    Index predicted_edges = 0;
    Index true_edges = 0;
    bool skeleton = false;

    friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

namespace detail {

/// Pair state: 0 none, 1 i->j only, 2 j->i only, 3 both.
inline int pair_state(const AdjacencyMatrix& m, Index i, Index j) {
    return (m.has_edge(i, j) ? 1 : 0) | (m.has_edge(j, i) ? 2 : 0);
}

}  // namespace detail

/// Structural Hamming distance over unordered pairs: one unit per insertion, deletion or flip.
inline Index shd(const AdjacencyMatrix& a, const AdjacencyMatrix& b, bool ignore_orientation = false) {
    a.require_binary("shd");
    b.require_binary("shd");
    if (a.size() != b.size()) throw DimensionMismatch("shd: graphs differ in dimension");
    Index total = 0;
    for (Index i = 0; i < a.size(); ++i)
        for (Index j = i + 1; j < a.size(); ++j) {
            const int sa = detail::pair_state(a, i, j);
            const int sb = detail::pair_state(b, i, j);
            if ((sa == 0) != (sb == 0))
                ++total;
            else if (sa != sb && !ignore_orientation)
                ++total;
        }
    return total;
}

/**
 * Direction-sensitive by default: an estimated edge is correct only if the
 * truth has it with the same orientation; reversed edges count as wrong.
 * Zero predicted edges gives FDR 0; zero true edges gives TPR 1.
 */
inline EvalReport evaluate(const AdjacencyMatrix& estimated, const AdjacencyMatrix& truth, bool skeleton = false) {
    estimated.require_binary("evaluate");
    truth.require_binary("evaluate");
    if (estimated.size() != truth.size())
        throw DimensionMismatch("evaluate: estimated graph has d=" + std::to_string(estimated.size()) +
                                ", truth has d=" + std::to_string(truth.size()));
    EvalReport r;
    r.skeleton = skeleton;
    const Index d = truth.size();
    if (!skeleton) {
        for (Index i = 0; i < d; ++i)
            for (Index j = 0; j < d; ++j) {
                if (estimated.has_edge(i, j)) {
                    ++r.predicted_edges;
                    if (truth.has_edge(i, j))
                        ++r.counts.true_positives;
                    else if (truth.has_edge(j, i))
                        ++r.counts.reversed;
                    else
                        ++r.counts.extra;
                }
                if (truth.has_edge(i, j)) {
                    ++r.true_edges;
                    if (!estimated.has_edge(i, j) && !estimated.has_edge(j, i)) ++r.counts.missing;
                }
            }
    } else {
        for (Index i = 0; i < d; ++i)
            for (Index j = i + 1; j < d; ++j) {
                const bool e = detail::pair_state(estimated, i, j) != 0;
                const bool t = detail::pair_state(truth, i, j) != 0;
                r.predicted_edges += e;
                r.true_edges += t;
                if (e && t) ++r.counts.true_positives;
                if (e && !t) ++r.counts.extra;
                if (!e && t) ++r.counts.missing;
            }
    }
    r.counts.false_positives = r.counts.reversed + r.counts.extra;
    r.tpr = r.true_edges == 0 ? 1.0 : static_cast<double>(r.counts.true_positives) / static_cast<double>(r.true_edges);
    r.fdr = r.predicted_edges == 0 ? 0.0
                                   : static_cast<double>(r.counts.false_positives) / static_cast<double>(r.predicted_edges);
    r.shd = shd(estimated, truth, skeleton);
    return r;
}

inline EvalReport evaluate(const AdjacencyMatrix& estimated, const GroundTruth& truth, bool skeleton = false) {
    return evaluate(estimated, truth.adjacency, skeleton);
}

inline nlohmann::json to_json(const EvalReport& r) {
    return {{"shd", r.shd},
            {"tpr", r.tpr},
            {"fdr", r.fdr},
            {"skeleton", r.skeleton},
            {"predicted_edges", r.predicted_edges},
            {"true_edges", r.true_edges},
            {"counts",
             {{"true_positives", r.counts.true_positives},
              {"false_positives", r.counts.false_positives},
              {"reversed", r.counts.reversed},
              {"missing", r.counts.missing},
              {"extra", r.counts.extra}}}};
}

inline std::string eval_csv_header() { return "shd,tpr,fdr,true_positives,false_positives,reversed,missing,extra"; }

inline std::string eval_csv_row(const EvalReport& r) {
    std::ostringstream out;
    out.precision(6);
    out << std::fixed << r.shd << ',' << r.tpr << ',' << r.fdr << ',' << r.counts.true_positives << ','
        << r.counts.false_positives << ',' << r.counts.reversed << ',' << r.counts.missing << ',' << r.counts.extra;
    return out.str();
}

}  // namespace priorcd
