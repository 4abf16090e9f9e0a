#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "priorcd/bundled_networks.hpp"
#include "priorcd/core.hpp"
#include "priorcd/graph_io.hpp"

namespace priorcd {

/// Conditional distribution of one node; row = parent configuration in mixed radix
/// over the parents in ascending index order (first parent most significant).
struct Cpt {
    std::vector<Index> parents;
    std::vector<Index> radix;
    Eigen::MatrixXd table;  // configurations x categories

    Index configuration(const std::vector<Index>& parent_values) const {
        Index c = 0;
        for (Index k = 0; k < parents.size(); ++k) c = c * radix[k] + parent_values[k];
        return c;
    }
};

struct BayesNet {
    std::string name;
    std::vector<VariableMeta> variables;
    AdjacencyMatrix adjacency;
    std::vector<Cpt> cpts;

    Index size() const noexcept { return variables.size(); }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        for (const auto& v : variables) out.push_back(v.name);
        return out;
    }
};

struct GroundTruth {
    std::string name;
    AdjacencyMatrix adjacency;
    std::vector<std::string> variables;
};

inline constexpr double kCptRowTolerance = 1e-9;

inline BayesNet bayes_net_from_json(const nlohmann::json& doc, const std::string& origin) {
    if (!doc.is_object() || !doc.contains("variables") || !doc["variables"].is_array())
        throw ParseError(origin + ": missing \"variables\" array");
    BayesNet net;
    net.name = doc.value("name", origin);
    std::vector<std::string> names;
    for (const auto& v : doc["variables"]) {
        if (!v.is_object() || !v.contains("name") || !v.contains("categories"))
            throw ParseError(origin + ": each variable needs \"name\" and \"categories\"");
        auto meta = VariableMeta::discrete(v["name"].get<std::string>(), v["categories"].get<std::vector<std::string>>());
        names.push_back(meta.name);
        net.variables.push_back(std::move(meta));
    }
    validate_variables(net.variables);
    nlohmann::json graph{{"variables", names}, {"edges", doc.value("edges", nlohmann::json::array())}};
    net.adjacency = graph_from_json(graph, origin).adjacency;
    if (!is_acyclic(net.adjacency)) throw ContractViolation(origin + ": network structure is cyclic");

    if (!doc.contains("cpts") || !doc["cpts"].is_object()) throw ParseError(origin + ": missing \"cpts\" object");
    const auto& cpts = doc["cpts"];
    for (Index j = 0; j < net.size(); ++j) {
        const auto& meta = net.variables[j];
        if (!cpts.contains(meta.name)) throw ContractViolation(origin + ": no CPT for '" + meta.name + "'");
        const auto& rows = cpts[meta.name];
        Cpt cpt;
        cpt.parents = parent_set(net.adjacency, j);
        Index q = 1;
        for (Index p : cpt.parents) {
            cpt.radix.push_back(net.variables[p].cardinality());
            q *= net.variables[p].cardinality();
        }
        const Index r = meta.cardinality();
        cpt.table.resize(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(r));
        if (rows.size() != q)
            throw ContractViolation(origin + ": CPT of '" + meta.name + "' has " + std::to_string(rows.size()) +
                                    " rows, expected " + std::to_string(q));
        std::vector<Index> values(cpt.parents.size(), 0);
        for (Index c = 0; c < q; ++c) {
            // decode c into parent labels
            Index rest = c;
            for (Index k = cpt.parents.size(); k-- > 0;) {
                values[k] = rest % cpt.radix[k];
                rest /= cpt.radix[k];
            }
            std::string key;
            for (Index k = 0; k < cpt.parents.size(); ++k) {
                if (k) key += ',';
                key += net.variables[cpt.parents[k]].categories[values[k]];
            }
            if (!rows.contains(key))
                throw ContractViolation(origin + ": CPT of '" + meta.name + "' lacks configuration '" + key + "'");
            const auto probs = rows[key].get<std::vector<double>>();
            if (probs.size() != r)
                throw ContractViolation(origin + ": CPT row '" + key + "' of '" + meta.name + "' has wrong length");
            double sum = 0.0;
            for (Index k = 0; k < r; ++k) {
                if (!(probs[k] >= 0.0)) throw ContractViolation(origin + ": negative probability in '" + meta.name + "'");
                cpt.table(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(k)) = probs[k];
                sum += probs[k];
            }
            if (std::abs(sum - 1.0) > kCptRowTolerance)
                throw ContractViolation(origin + ": CPT row '" + key + "' of '" + meta.name + "' sums to " +
                                        std::to_string(sum));
        }
        net.cpts.push_back(std::move(cpt));
    }
    return net;
}

inline std::vector<std::string> bundled_network_names() {
    std::vector<std::string> out;
    for (const auto& [name, text] : bundled::network_sources())
        if (name.find("_truth") == std::string::npos) out.push_back(name);
    return out;
}

inline BayesNet load_network(const std::string& name) {
    const auto& sources = bundled::network_sources();
    auto it = sources.find(name);
    if (it == sources.end() || name.find("_truth") != std::string::npos)
        throw ContractViolation("unknown network '" + name + "'");
    return bayes_net_from_json(parse_json(std::string(it->second), name), name);
}

/// Ground truth for any bundled network, plus structure-only truths such as "sachs".
inline GroundTruth load_ground_truth(const std::string& name) {
    const auto& sources = bundled::network_sources();
    if (auto it = sources.find(name + "_truth"); it != sources.end()) {
        auto g = graph_from_json(parse_json(std::string(it->second), name), name);
        return {name, std::move(g.adjacency), std::move(g.variables)};
    }
    if (sources.contains(name)) {
        auto net = load_network(name);
        return {name, net.adjacency, net.names()};
    }
    throw ContractViolation("unknown ground truth '" + name + "'");
}

inline GroundTruth ground_truth(const BayesNet& net) { return {net.name, net.adjacency, net.names()}; }

/// Ancestral sampling in topological order; identical (net, n, seed) gives identical data.
inline Dataset forward_sample(const BayesNet& net, Index n, std::uint64_t seed) {
    if (n < 1) throw ContractViolation("forward_sample needs n >= 1");
    const auto order = topological_order(net.adjacency);
    const auto d = static_cast<Eigen::Index>(net.size());
    Eigen::MatrixXd values(static_cast<Eigen::Index>(n), d);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Index> row(net.size(), 0);
    std::vector<Index> parent_values;
    for (Index r = 0; r < n; ++r) {
        for (Index j : order) {
            const auto& cpt = net.cpts[j];
            parent_values.clear();
            for (Index p : cpt.parents) parent_values.push_back(row[p]);
            const auto c = static_cast<Eigen::Index>(cpt.configuration(parent_values));
            const double u = unit(rng);
            const Eigen::Index r_j = cpt.table.cols();
            Eigen::Index pick = r_j - 1;
            double acc = 0.0;
            for (Eigen::Index k = 0; k < r_j; ++k) {
                acc += cpt.table(c, k);
                if (u < acc) {
                    pick = k;
                    break;
                }
            }
            // a zero-probability last category must never be drawn through rounding
            while (pick > 0 && cpt.table(c, pick) == 0.0) --pick;
            row[j] = static_cast<Index>(pick);
        }
        for (Index j = 0; j < net.size(); ++j)
            values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = static_cast<double>(row[j]);
    }
    return Dataset(std::move(values), net.variables);
}

// ---------------------------------------------------------------------------
// Observation files

/// CSV with a header row. Discrete cells are written as category labels.
inline std::string observations_to_csv(const Dataset& data) {
    std::ostringstream out;
    out.precision(17);
    for (Index j = 0; j < data.d(); ++j) out << (j ? "," : "") << data.variable(j).name;
    out << '\n';
    for (Index r = 0; r < data.n(); ++r) {
        for (Index j = 0; j < data.d(); ++j) {
            if (j) out << ',';
            const double x = data.values()(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j));
            const auto& meta = data.variable(j);
            if (meta.is_discrete())
                out << meta.categories[static_cast<Index>(x)];
            else
                out << x;
        }
        out << '\n';
    }
    return out.str();
}

namespace detail {

inline std::optional<double> parse_number(const std::string& cell) {
    if (cell.empty()) return std::nullopt;
    try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        if (used != cell.size()) return std::nullopt;
        return v;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

}  // namespace detail

/**
 * Reads a header-row CSV. Column kinds come from `declared` when given
 * (matched by name); otherwise an all-numeric column is Continuous and any
 * other column is Discrete with categories in order of first appearance.
 * With a ground truth, columns are reordered to the truth's variable order.
 */
inline Dataset observations_from_csv(const std::string& text, const std::optional<GroundTruth>& truth = std::nullopt,
                                     const std::vector<VariableMeta>& declared = {},
                                     const std::string& origin = "observations") {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(origin + ": empty file");
    auto header = split_csv_line(line);
    for (auto& h : header) h = detail::trim(h);
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (detail::trim(line).empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw ParseError(origin + ": row " + std::to_string(rows.size() + 2) + " has " +
                             std::to_string(cells.size()) + " cells, header has " + std::to_string(header.size()));
        for (auto& c : cells) c = detail::trim(c);
        rows.push_back(std::move(cells));
    }
    if (rows.empty()) throw ParseError(origin + ": no data rows");

    std::vector<Index> column_order(header.size());
    for (Index k = 0; k < header.size(); ++k) column_order[k] = k;
    if (truth) {
        std::vector<std::string> problems;
        std::unordered_map<std::string, Index> pos;
        for (Index k = 0; k < header.size(); ++k) pos.emplace(header[k], k);
        column_order.clear();
        for (const auto& name : truth->variables) {
            auto it = pos.find(name);
            if (it == pos.end()) {
                problems.push_back("missing column '" + name + "'");
                continue;
            }
            column_order.push_back(it->second);
        }
        for (const auto& h : header)
            if (std::find(truth->variables.begin(), truth->variables.end(), h) == truth->variables.end())
                problems.push_back("extra column '" + h + "'");
        if (!problems.empty()) {
            std::string msg = origin + " does not match ground truth '" + truth->name + "':";
            for (const auto& p : problems) msg += " " + p + ";";
            throw ContractViolation(msg);
        }
    }

    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto d = static_cast<Eigen::Index>(column_order.size());
    Eigen::MatrixXd values(n, d);
    std::vector<VariableMeta> metas;
    for (Eigen::Index out_col = 0; out_col < d; ++out_col) {
        const Index src = column_order[static_cast<Index>(out_col)];
        const std::string& name = header[src];
        const VariableMeta* decl = nullptr;
        for (const auto& v : declared)
            if (v.name == name) decl = &v;

        bool numeric = true;
        for (const auto& row : rows)
            if (!detail::parse_number(row[src])) {
                numeric = false;
                break;
            }
        const bool continuous = decl ? !decl->is_discrete() : numeric;
        if (continuous) {
            for (Eigen::Index r = 0; r < n; ++r) {
                auto v = detail::parse_number(rows[static_cast<Index>(r)][src]);
                if (!v)
                    throw ParseError(origin + ": non-numeric cell '" + rows[static_cast<Index>(r)][src] +
                                     "' in continuous column '" + name + "'");
                values(r, out_col) = *v;
            }
            metas.push_back(VariableMeta::continuous(name));
        } else {
            std::vector<std::string> categories = decl ? decl->categories : std::vector<std::string>{};
            for (Eigen::Index r = 0; r < n; ++r) {
                const auto& cell = rows[static_cast<Index>(r)][src];
                auto it = std::find(categories.begin(), categories.end(), cell);
                if (it == categories.end()) {
                    if (decl)
                        throw ParseError(origin + ": value '" + cell + "' not a declared category of '" + name + "'");
                    categories.push_back(cell);
                    it = categories.end() - 1;
                }
                values(r, out_col) = static_cast<double>(it - categories.begin());
            }
            metas.push_back(VariableMeta::discrete(name, std::move(categories)));
        }
    }
    return Dataset(std::move(values), std::move(metas));
}

inline Dataset load_observations(const std::string& path, const std::optional<GroundTruth>& truth = std::nullopt,
                                 const std::vector<VariableMeta>& declared = {}) {
    return observations_from_csv(read_text_file(path), truth, declared, path);
}

}  // namespace priorcd
