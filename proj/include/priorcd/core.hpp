#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "priorcd/errors.hpp"

namespace priorcd {

using Index = std::size_t;
using Edge = std::pair<Index, Index>;

/**
 * Directed graph over d variables stored as a dense d x d matrix.
 *
 * Entry (i, j) nonzero means the edge i -> j, i.e. variable i is a direct
 * cause of variable j. The parents of node j therefore live in column j.
 * Binary matrices hold only 0/1; weighted matrices (the continuous
 * optimizer's output) hold arbitrary reals. The diagonal is always zero.
 */
class AdjacencyMatrix {
public:
    AdjacencyMatrix() = default;

    static AdjacencyMatrix zeros(Index d) {
        if (d == 0) throw ContractViolation("adjacency matrix needs d >= 1");
        return AdjacencyMatrix(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d),
                                                     static_cast<Eigen::Index>(d)),
                               true);
    }

    /// Validates that every entry is 0 or 1 and the diagonal is zero.
    static AdjacencyMatrix binary(Eigen::MatrixXd values) {
        check_shape(values);
        for (Eigen::Index j = 0; j < values.cols(); ++j)
            for (Eigen::Index i = 0; i < values.rows(); ++i)
                if (values(i, j) != 0.0 && values(i, j) != 1.0)
                    throw ContractViolation("binary adjacency entry (" + std::to_string(i) + "," +
                                            std::to_string(j) + ") is not in {0,1}");
        return AdjacencyMatrix(std::move(values), true);
    }

    static AdjacencyMatrix weighted(Eigen::MatrixXd values) {
        check_shape(values);
        for (Eigen::Index j = 0; j < values.cols(); ++j)
            for (Eigen::Index i = 0; i < values.rows(); ++i)
                if (!std::isfinite(values(i, j)))
                    throw ContractViolation("weighted adjacency contains a non-finite entry");
        return AdjacencyMatrix(std::move(values), false);
    }

    static AdjacencyMatrix from_edges(Index d, const std::vector<Edge>& edges) {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d),
                                                  static_cast<Eigen::Index>(d));
        for (const auto& [from, to] : edges) {
            if (from >= d || to >= d) throw ContractViolation("edge endpoint out of range");
            if (from == to) throw ContractViolation("self-loop edge");
            m(static_cast<Eigen::Index>(from), static_cast<Eigen::Index>(to)) = 1.0;
        }
        return binary(std::move(m));
    }

    Index size() const noexcept { return static_cast<Index>(values_.rows()); }
    bool is_binary() const noexcept { return binary_; }
    const Eigen::MatrixXd& values() const noexcept { return values_; }

    double operator()(Index i, Index j) const {
        return values_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }

    bool has_edge(Index i, Index j) const { return (*this)(i, j) != 0.0; }

    Index edge_count() const {
        return static_cast<Index>((values_.array() != 0.0).count());
    }

    /// Edges in row-major (from, to) order.
    std::vector<Edge> edges() const {
        std::vector<Edge> out;
        for (Index i = 0; i < size(); ++i)
            for (Index j = 0; j < size(); ++j)
                if (has_edge(i, j)) out.emplace_back(i, j);
        return out;
    }

    /// Copy with edge i -> j set (binary matrices only).
    AdjacencyMatrix with_edge(Index i, Index j, bool present) const {
        require_binary("with_edge");
        if (i >= size() || j >= size()) throw ContractViolation("edge endpoint out of range");
        if (i == j && present) throw ContractViolation("self-loop edge");
        Eigen::MatrixXd copy = values_;
        copy(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = present ? 1.0 : 0.0;
        return AdjacencyMatrix(std::move(copy), true);
    }

    /// Reorders variables: result(k, l) = this(order[k], order[l]).
    AdjacencyMatrix permuted(const std::vector<Index>& order) const {
        if (order.size() != size()) throw DimensionMismatch("permutation length differs from d");
        Eigen::MatrixXd out(values_.rows(), values_.cols());
        for (Index k = 0; k < size(); ++k)
            for (Index l = 0; l < size(); ++l)
                out(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l)) = (*this)(order[k], order[l]);
        return AdjacencyMatrix(std::move(out), binary_);
    }

    void require_binary(const char* op) const {
        if (!binary_) throw ContractViolation(std::string(op) + " requires a binary adjacency matrix");
    }

    friend bool operator==(const AdjacencyMatrix& a, const AdjacencyMatrix& b) {
        return a.binary_ == b.binary_ && a.values_.rows() == b.values_.rows() && a.values_ == b.values_;
    }

private:
    AdjacencyMatrix(Eigen::MatrixXd values, bool binary) : values_(std::move(values)), binary_(binary) {}

    static void check_shape(const Eigen::MatrixXd& values) {
        if (values.rows() < 1 || values.rows() != values.cols())
            throw ContractViolation("adjacency matrix must be square with d >= 1");
        for (Eigen::Index i = 0; i < values.rows(); ++i)
            if (values(i, i) != 0.0) throw ContractViolation("adjacency diagonal must be zero");
    }

    Eigen::MatrixXd values_;
    bool binary_ = true;
};

enum class VariableKind { Continuous, Discrete };

struct VariableMeta {
    std::string name;
    VariableKind kind = VariableKind::Continuous;
    std::vector<std::string> categories;  // required iff Discrete

    static VariableMeta continuous(std::string name) {
        return {std::move(name), VariableKind::Continuous, {}};
    }
    static VariableMeta discrete(std::string name, std::vector<std::string> categories) {
        return {std::move(name), VariableKind::Discrete, std::move(categories)};
    }

    bool is_discrete() const noexcept { return kind == VariableKind::Discrete; }
    Index cardinality() const noexcept { return categories.size(); }

    friend bool operator==(const VariableMeta&, const VariableMeta&) = default;
};

inline void validate_variables(const std::vector<VariableMeta>& variables) {
    std::unordered_set<std::string> seen;
    for (const auto& v : variables) {
        if (v.name.empty()) throw ContractViolation("variable name must be nonempty");
        if (!seen.insert(v.name).second) throw ContractViolation("duplicate variable name '" + v.name + "'");
        if (v.is_discrete() && v.categories.empty())
            throw ContractViolation("discrete variable '" + v.name + "' has no categories");
    }
}

/**
 * n x d observation table. Discrete columns store the category index
 * (0 .. cardinality-1) as a double.
 */
class Dataset {
public:
    Dataset(Eigen::MatrixXd values, std::vector<VariableMeta> variables)
        : values_(std::move(values)), variables_(std::move(variables)) {
        if (values_.rows() < 1 || values_.cols() < 1) throw ContractViolation("dataset needs n >= 1 and d >= 1");
        if (static_cast<Index>(values_.cols()) != variables_.size())
            throw DimensionMismatch("dataset has " + std::to_string(values_.cols()) + " columns but " +
                                    std::to_string(variables_.size()) + " variables");
        validate_variables(variables_);
        for (Index j = 0; j < variables_.size(); ++j) {
            const auto& v = variables_[j];
            auto col = values_.col(static_cast<Eigen::Index>(j));
            for (Eigen::Index r = 0; r < col.size(); ++r) {
                const double x = col(r);
                if (!std::isfinite(x)) throw ContractViolation("non-finite value in column '" + v.name + "'");
                if (v.is_discrete() &&
                    (x < 0 || x != std::floor(x) || x >= static_cast<double>(v.cardinality())))
                    throw ContractViolation("value outside declared categories in column '" + v.name + "'");
            }
        }
    }

    Index n() const noexcept { return static_cast<Index>(values_.rows()); }
    Index d() const noexcept { return static_cast<Index>(values_.cols()); }
    const Eigen::MatrixXd& values() const noexcept { return values_; }
    const std::vector<VariableMeta>& variables() const noexcept { return variables_; }
    const VariableMeta& variable(Index j) const { return variables_.at(j); }

    bool all_discrete() const {
        for (const auto& v : variables_)
            if (!v.is_discrete()) return false;
        return true;
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        out.reserve(variables_.size());
        for (const auto& v : variables_) out.push_back(v.name);
        return out;
    }

    std::optional<Index> find(const std::string& name) const {
        for (Index j = 0; j < variables_.size(); ++j)
            if (variables_[j].name == name) return j;
        return std::nullopt;
    }

    Index index_of(const std::string& name) const {
        if (auto j = find(name)) return *j;
        throw ContractViolation("unknown variable '" + name + "'");
    }

private:
    Eigen::MatrixXd values_;
    std::vector<VariableMeta> variables_;
};

/// Kahn elimination over the nonzero pattern.
inline bool is_acyclic(const AdjacencyMatrix& m) {
    m.require_binary("is_acyclic");
    const Index d = m.size();
    std::vector<Index> indegree(d, 0);
    for (Index i = 0; i < d; ++i)
        for (Index j = 0; j < d; ++j)
            if (m.has_edge(i, j)) ++indegree[j];
    std::vector<Index> ready;
    for (Index j = 0; j < d; ++j)
        if (indegree[j] == 0) ready.push_back(j);
    Index removed = 0;
    while (!ready.empty()) {
        const Index i = ready.back();
        ready.pop_back();
        ++removed;
        for (Index j = 0; j < d; ++j)
            if (m.has_edge(i, j) && --indegree[j] == 0) ready.push_back(j);
    }
    return removed == d;
}

/// Topological order of an acyclic binary matrix (smallest ready index first).
inline std::vector<Index> topological_order(const AdjacencyMatrix& m) {
    m.require_binary("topological_order");
    const Index d = m.size();
    std::vector<Index> indegree(d, 0);
    for (Index i = 0; i < d; ++i)
        for (Index j = 0; j < d; ++j)
            if (m.has_edge(i, j)) ++indegree[j];
    std::set<Index> ready;
    for (Index j = 0; j < d; ++j)
        if (indegree[j] == 0) ready.insert(j);
    std::vector<Index> order;
    while (!ready.empty()) {
        const Index i = *ready.begin();
        ready.erase(ready.begin());
        order.push_back(i);
        for (Index j = 0; j < d; ++j)
            if (m.has_edge(i, j) && --indegree[j] == 0) ready.insert(j);
    }
    if (order.size() != d) throw ContractViolation("graph contains a directed cycle");
    return order;
}

inline AdjacencyMatrix threshold(const AdjacencyMatrix& m, double tau) {
    if (!(tau >= 0.0)) throw ContractViolation("threshold tau must be nonnegative");
    const auto d = static_cast<Eigen::Index>(m.size());
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index j = 0; j < d; ++j)
        for (Eigen::Index i = 0; i < d; ++i)
            if (i != j && std::abs(m.values()(i, j)) > tau) out(i, j) = 1.0;
    return AdjacencyMatrix::binary(std::move(out));
}

inline std::vector<Index> parent_set(const AdjacencyMatrix& m, Index j) {
    m.require_binary("parent_set");
    if (j >= m.size()) throw ContractViolation("node index " + std::to_string(j) + " out of range");
    std::vector<Index> parents;
    for (Index i = 0; i < m.size(); ++i)
        if (m.has_edge(i, j)) parents.push_back(i);
    return parents;
}

/// Inverse of parent_set applied to every node.
inline AdjacencyMatrix from_parent_sets(const std::vector<std::vector<Index>>& parents) {
    std::vector<Edge> edges;
    for (Index j = 0; j < parents.size(); ++j)
        for (Index i : parents[j]) edges.emplace_back(i, j);
    return AdjacencyMatrix::from_edges(parents.size(), edges);
}

/// Number of cells where the two binary graphs differ.
inline Index hamming_distance(const AdjacencyMatrix& a, const AdjacencyMatrix& b) {
    if (a.size() != b.size()) throw DimensionMismatch("hamming_distance: dimension mismatch");
    return static_cast<Index>((a.values().array() != b.values().array()).count());
}

}  // namespace priorcd
