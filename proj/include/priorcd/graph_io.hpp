#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "priorcd/core.hpp"

namespace priorcd {

namespace detail {

inline std::string trim(std::string_view s) {
    auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

inline std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

}  // namespace detail

/// A binary graph together with the variable names it is expressed over.
struct NamedGraph {
    std::vector<std::string> variables;
    AdjacencyMatrix adjacency;
};

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path + "'");
    out << text;
    if (!out) throw Error("write failed for '" + path + "'");
}

inline nlohmann::json parse_json(const std::string& text, const std::string& origin) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("malformed JSON in " + origin + ": " + e.what(), text);
    }
}

inline nlohmann::json graph_to_json(const std::vector<std::string>& variables, const AdjacencyMatrix& m) {
    m.require_binary("graph_to_json");
    if (variables.size() != m.size()) throw DimensionMismatch("variable list does not match adjacency size");
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& [from, to] : m.edges()) edges.push_back({variables[from], variables[to]});
    return {{"variables", variables}, {"edges", edges}};
}

/// Resolves edge names against the document's own variable list; unknown names are errors.
inline NamedGraph graph_from_json(const nlohmann::json& doc, const std::string& origin = "graph") {
    if (!doc.is_object() || !doc.contains("variables") || !doc["variables"].is_array())
        throw ParseError(origin + ": missing \"variables\" array");
    NamedGraph g;
    std::unordered_map<std::string, Index> index;
    for (const auto& v : doc["variables"]) {
        if (!v.is_string()) throw ParseError(origin + ": variable names must be strings");
        const auto name = v.get<std::string>();
        if (name.empty() || !index.emplace(name, g.variables.size()).second)
            throw ParseError(origin + ": empty or duplicate variable name '" + name + "'");
        g.variables.push_back(name);
    }
    if (g.variables.empty()) throw ParseError(origin + ": no variables");
    std::vector<Edge> edges;
    if (doc.contains("edges")) {
        if (!doc["edges"].is_array()) throw ParseError(origin + ": \"edges\" must be an array");
        for (const auto& e : doc["edges"]) {
            if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_string())
                throw ParseError(origin + ": each edge must be a [from, to] pair of names");
            const auto from = e[0].get<std::string>();
            const auto to = e[1].get<std::string>();
            auto fi = index.find(from);
            auto ti = index.find(to);
            if (fi == index.end()) throw ContractViolation(origin + ": edge names unknown variable '" + from + "'");
            if (ti == index.end()) throw ContractViolation(origin + ": edge names unknown variable '" + to + "'");
            if (fi->second == ti->second) throw ContractViolation(origin + ": self-loop on '" + from + "'");
            edges.emplace_back(fi->second, ti->second);
        }
    }
    g.adjacency = AdjacencyMatrix::from_edges(g.variables.size(), edges);
    return g;
}

inline NamedGraph load_graph_json(const std::string& path) {
    return graph_from_json(parse_json(read_text_file(path), path), path);
}

/// Re-expresses a named graph over a target variable order. Both name sets must match.
inline AdjacencyMatrix align_graph(const NamedGraph& g, const std::vector<std::string>& target,
                                   const std::string& origin = "graph") {
    if (g.variables.size() != target.size())
        throw DimensionMismatch(origin + " has " + std::to_string(g.variables.size()) +
                                " variables, expected " + std::to_string(target.size()));
    std::unordered_map<std::string, Index> pos;
    for (Index k = 0; k < target.size(); ++k) pos.emplace(target[k], k);
    std::vector<Edge> edges;
    for (const auto& name : g.variables)
        if (!pos.contains(name)) throw DimensionMismatch(origin + ": variable '" + name + "' not in dataset");
    for (const auto& [from, to] : g.adjacency.edges())
        edges.emplace_back(pos.at(g.variables[from]), pos.at(g.variables[to]));
    return AdjacencyMatrix::from_edges(target.size(), edges);
}

/// Dense CSV: a header row of names followed by d rows of entries.
inline std::string graph_to_csv(const std::vector<std::string>& variables, const AdjacencyMatrix& m) {
    if (variables.size() != m.size()) throw DimensionMismatch("variable list does not match adjacency size");
    std::ostringstream out;
    out << std::setprecision(17);
    for (Index k = 0; k < variables.size(); ++k) out << (k ? "," : "") << variables[k];
    out << '\n';
    for (Index i = 0; i < m.size(); ++i) {
        for (Index j = 0; j < m.size(); ++j) out << (j ? "," : "") << m(i, j);
        out << '\n';
    }
    return out.str();
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (std::size_t k = 0; k < line.size(); ++k) {
        const char c = line[k];
        if (quoted) {
            if (c == '"' && k + 1 < line.size() && line[k + 1] == '"') {
                cell += '"';
                ++k;
            } else if (c == '"') {
                quoted = false;
            } else {
                cell += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            cells.push_back(cell);
            cell.clear();
        } else if (c != '\r') {
            cell += c;
        }
    }
    cells.push_back(cell);
    return cells;
}

inline NamedGraph graph_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty adjacency CSV");
    NamedGraph g;
    g.variables = split_csv_line(line);
    const auto d = static_cast<Eigen::Index>(g.variables.size());
    Eigen::MatrixXd m(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        if (!std::getline(in, line)) throw ParseError("adjacency CSV has fewer than d rows");
        const auto cells = split_csv_line(line);
        if (static_cast<Eigen::Index>(cells.size()) != d) throw ParseError("adjacency CSV row has wrong width");
        for (Eigen::Index j = 0; j < d; ++j) {
            try {
                m(i, j) = std::stod(cells[static_cast<std::size_t>(j)]);
            } catch (const std::exception&) {
                throw ParseError("non-numeric adjacency CSV cell '" + cells[static_cast<std::size_t>(j)] + "'");
            }
        }
    }
    const bool is_bin = ((m.array() == 0.0) || (m.array() == 1.0)).all();
    g.adjacency = is_bin ? AdjacencyMatrix::binary(m) : AdjacencyMatrix::weighted(m);
    return g;
}

}  // namespace priorcd
