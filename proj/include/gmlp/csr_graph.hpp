#pragma once

#include "gmlp/common.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace gmlp {

using EdgeList = std::vector<std::pair<Index, Index>>;

/// Immutable sparse adjacency in compressed-row form. Rows are sorted
/// ascending and duplicate-free; construction goes through build_csr.
struct CsrGraph {
    Index num_nodes = 0;
    std::vector<Index> row_offsets;  // length num_nodes + 1
    std::vector<Index> col_indices;  // length nnz
    bool is_undirected = false;
    bool has_self_loops = false;

    Index nnz() const { return static_cast<Index>(col_indices.size()); }
    Index row_begin(Index v) const { return row_offsets[static_cast<std::size_t>(v)]; }
    Index row_end(Index v) const { return row_offsets[static_cast<std::size_t>(v) + 1]; }
    Index row_size(Index v) const { return row_end(v) - row_begin(v); }

    bool has_edge(Index u, Index v) const {
        auto first = col_indices.begin() + row_begin(u);
        auto last = col_indices.begin() + row_end(u);
        return std::binary_search(first, last, v);
    }

    /// All stored (u,v) pairs, row order. Inverse of build_csr up to set equality.
    EdgeList edges() const {
        EdgeList out;
        out.reserve(col_indices.size());
        for (Index u = 0; u < num_nodes; ++u)
            for (Index e = row_begin(u); e < row_end(u); ++e)
                out.emplace_back(u, col_indices[static_cast<std::size_t>(e)]);
        return out;
    }
};

struct BuildOptions {
    bool symmetrize = true;
    bool add_self_loops = true;
};

/// Sorted, deduplicated CSR from an edge list. Symmetrization inserts the
/// reverse of every pair before dedup; self-loops are added exactly once
/// per node when requested.
inline CsrGraph build_csr(const EdgeList& edges, Index num_nodes, const BuildOptions& opts = {}) {
    if (num_nodes <= 0)
        throw InputError("build_csr: num_nodes must be positive");
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const auto& [u, v] = edges[i];
        if (u < 0 || u >= num_nodes || v < 0 || v >= num_nodes)
            throw InputError("build_csr: edge " + std::to_string(i) + " endpoint (" +
                             std::to_string(u) + "," + std::to_string(v) + ") out of range [0," +
                             std::to_string(num_nodes) + ")");
    }

    EdgeList all;
    all.reserve(edges.size() * (opts.symmetrize ? 2 : 1) +
                (opts.add_self_loops ? static_cast<std::size_t>(num_nodes) : 0));
    for (const auto& [u, v] : edges) {
        all.emplace_back(u, v);
        if (opts.symmetrize && u != v) all.emplace_back(v, u);
    }
    if (opts.add_self_loops)
        for (Index v = 0; v < num_nodes; ++v) all.emplace_back(v, v);

    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());

    CsrGraph g;
    g.num_nodes = num_nodes;
    g.is_undirected = opts.symmetrize;
    g.has_self_loops = opts.add_self_loops;
    g.row_offsets.assign(static_cast<std::size_t>(num_nodes) + 1, 0);
    g.col_indices.reserve(all.size());
    for (const auto& [u, v] : all) {
        g.row_offsets[static_cast<std::size_t>(u) + 1]++;
        g.col_indices.push_back(v);
    }
    for (Index v = 0; v < num_nodes; ++v)
        g.row_offsets[static_cast<std::size_t>(v) + 1] += g.row_offsets[static_cast<std::size_t>(v)];
    return g;
}

/// Degrees under the self-augmented adjacency: row counts of a graph that
/// already stores its self-loops.
struct DegreeVector {
    std::vector<double> values;
};

inline DegreeVector augmented_degrees(const CsrGraph& g) {
    if (!g.has_self_loops)
        throw ContractError("augmented_degrees: graph must carry self-loops");
    DegreeVector d;
    d.values.resize(static_cast<std::size_t>(g.num_nodes));
    for (Index v = 0; v < g.num_nodes; ++v)
        d.values[static_cast<std::size_t>(v)] = static_cast<double>(g.row_size(v));
    return d;
}

/// Per-edge triangle participation counts, aligned with col_indices.
/// Self-loop slots carry weight 0. node_totals[v] is the row sum.
struct TriangleWeights {
    std::vector<Index> edge_weights;
    std::vector<double> node_totals;
};

/// Counts |N(u) ∩ N(v)| per stored edge via merge intersection of the two
/// sorted rows, skipping self-loop entries. The graph's self-loops never
/// contribute to a count.
inline TriangleWeights count_edge_triangles(const CsrGraph& g) {
    if (!g.is_undirected)
        throw ContractError("count_edge_triangles: graph must be undirected");
    TriangleWeights tw;
    tw.edge_weights.assign(g.col_indices.size(), 0);
    tw.node_totals.assign(static_cast<std::size_t>(g.num_nodes), 0.0);

    for (Index u = 0; u < g.num_nodes; ++u) {
        for (Index e = g.row_begin(u); e < g.row_end(u); ++e) {
            const Index v = g.col_indices[static_cast<std::size_t>(e)];
            if (v == u) continue;
            Index count = 0;
            Index i = g.row_begin(u), j = g.row_begin(v);
            const Index iend = g.row_end(u), jend = g.row_end(v);
            while (i < iend && j < jend) {
                const Index a = g.col_indices[static_cast<std::size_t>(i)];
                const Index b = g.col_indices[static_cast<std::size_t>(j)];
                if (a == u) { ++i; continue; }  // skip self-loop slots
                if (b == v) { ++j; continue; }
                if (a < b) ++i;
                else if (b < a) ++j;
                else { ++count; ++i; ++j; }
            }
            tw.edge_weights[static_cast<std::size_t>(e)] = count;
            tw.node_totals[static_cast<std::size_t>(u)] += static_cast<double>(count);
        }
    }
    return tw;
}

/// Structural invariant check. Empty result means the graph is well formed.
inline std::vector<std::string> validate(const CsrGraph& g) {
    std::vector<std::string> violations;
    const auto nnz = static_cast<Index>(g.col_indices.size());

    if (g.num_nodes < 0) violations.push_back("num_nodes is negative");
    if (static_cast<Index>(g.row_offsets.size()) != g.num_nodes + 1) {
        violations.push_back("row_offsets has length " + std::to_string(g.row_offsets.size()) +
                             ", expected num_nodes + 1 = " + std::to_string(g.num_nodes + 1));
        return violations;  // offsets unusable, later checks would read garbage
    }
    for (Index v = 0; v < g.num_nodes; ++v)
        if (g.row_offsets[static_cast<std::size_t>(v) + 1] < g.row_offsets[static_cast<std::size_t>(v)]) {
            violations.push_back("row_offsets decreases at row " + std::to_string(v));
            return violations;
        }
    if (g.row_offsets.front() != 0)
        violations.push_back("row_offsets[0] != 0");
    if (g.row_offsets.back() != nnz)
        violations.push_back("row_offsets[N] = " + std::to_string(g.row_offsets.back()) +
                             " does not match nnz = " + std::to_string(nnz));
    if (g.row_offsets.front() != 0 || g.row_offsets.back() != nnz) return violations;

    for (Index v = 0; v < g.num_nodes; ++v) {
        for (Index e = g.row_begin(v); e < g.row_end(v); ++e) {
            const Index c = g.col_indices[static_cast<std::size_t>(e)];
            if (c < 0 || c >= g.num_nodes)
                violations.push_back("col index " + std::to_string(c) + " out of range in row " +
                                     std::to_string(v));
            if (e > g.row_begin(v)) {
                const Index prev = g.col_indices[static_cast<std::size_t>(e) - 1];
                if (c == prev)
                    violations.push_back("duplicate edge (" + std::to_string(v) + "," +
                                         std::to_string(c) + ")");
                else if (c < prev)
                    violations.push_back("row " + std::to_string(v) + " not sorted at entry " +
                                         std::to_string(e - g.row_begin(v)));
            }
        }
    }
    if (!violations.empty()) return violations;

    if (g.is_undirected) {
        for (Index u = 0; u < g.num_nodes; ++u)
            for (Index e = g.row_begin(u); e < g.row_end(u); ++e) {
                const Index v = g.col_indices[static_cast<std::size_t>(e)];
                if (!g.has_edge(v, u))
                    violations.push_back("edge (" + std::to_string(u) + "," + std::to_string(v) +
                                         ") has no reverse in undirected graph");
            }
    }
    if (g.has_self_loops) {
        for (Index v = 0; v < g.num_nodes; ++v)
            if (!g.has_edge(v, v)) {
                violations.push_back("node " + std::to_string(v) +
                                     " lacks a self-loop but has_self_loops is set");
                break;
            }
    }
    return violations;
}

/// Edge-list text format: one "u<TAB>v" pair per line, 0-based, '#' starts a
/// comment line. Any run of whitespace is accepted as the separator.
inline EdgeList read_edge_list(std::istream& in, const std::string& name) {
    EdgeList edges;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t start = line.find_first_not_of(" \t\r");
        if (start == std::string::npos || line[start] == '#') continue;
        std::istringstream ss(line);
        Index u, v;
        if (!(ss >> u >> v))
            throw InputError(name + ":" + std::to_string(lineno) + ": expected 'u<TAB>v'");
        std::string extra;
        if (ss >> extra)
            throw InputError(name + ":" + std::to_string(lineno) + ": trailing tokens after edge");
        edges.emplace_back(u, v);
    }
    return edges;
}

inline EdgeList read_edge_list_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open edge list file: " + path);
    return read_edge_list(in, path);
}

}  // namespace gmlp
