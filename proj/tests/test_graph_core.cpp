#include "test_support.hpp"

#include <algorithm>
#include <set>

using namespace gmlp;
using testutil::TestRand;

namespace {

CsrGraph complete_graph(Index n) {
    EdgeList edges;
    for (Index u = 0; u < n; ++u)
        for (Index v = u + 1; v < n; ++v) edges.emplace_back(u, v);
    return build_csr(edges, n);
}

std::set<std::pair<Index, Index>> edge_set(const CsrGraph& g) {
    const EdgeList e = g.edges();
    return {e.begin(), e.end()};
}

// Reference triangle counts: enumerate all node triples on the loop-free view.
TriangleWeights brute_force_triangles(const CsrGraph& g) {
    auto linked = [&g](Index u, Index v) { return u != v && g.has_edge(u, v); };
    TriangleWeights tw;
    tw.edge_weights.assign(g.col_indices.size(), 0);
    tw.node_totals.assign(static_cast<std::size_t>(g.num_nodes), 0.0);
    for (Index u = 0; u < g.num_nodes; ++u) {
        for (Index e = g.row_begin(u); e < g.row_end(u); ++e) {
            const Index v = g.col_indices[static_cast<std::size_t>(e)];
            if (v == u) continue;
            Index count = 0;
            for (Index w = 0; w < g.num_nodes; ++w)
                if (w != u && w != v && linked(u, w) && linked(v, w)) ++count;
            tw.edge_weights[static_cast<std::size_t>(e)] = count;
            tw.node_totals[static_cast<std::size_t>(u)] += static_cast<double>(count);
        }
    }
    return tw;
}

}  // namespace

TEST_CASE("build_csr: smallest nontrivial graph", "[graph_core]") {
    const CsrGraph g = build_csr({{0, 1}}, 2);  // symmetrize + self-loops by default
    REQUIRE(g.num_nodes == 2);
    REQUIRE(g.nnz() == 4);
    REQUIRE(g.row_offsets == std::vector<Index>{0, 2, 4});
    REQUIRE(g.col_indices == std::vector<Index>{0, 1, 0, 1});
    REQUIRE(g.is_undirected);
    REQUIRE(g.has_self_loops);
    REQUIRE(validate(g).empty());
}

TEST_CASE("build_csr: duplicate and reverse edges deduplicate", "[graph_core]") {
    const CsrGraph g = build_csr({{0, 1}, {1, 0}, {0, 1}}, 2, {true, false});
    REQUIRE(g.nnz() == 2);
    REQUIRE(g.has_edge(0, 1));
    REQUIRE(g.has_edge(1, 0));
    REQUIRE_FALSE(g.has_edge(0, 0));
}

TEST_CASE("build_csr: input validation", "[graph_core]") {
    REQUIRE_THROWS_AS(build_csr({{0, 2}}, 2), InputError);
    REQUIRE_THROWS_AS(build_csr({{-1, 0}}, 2), InputError);
    REQUIRE_THROWS_AS(build_csr({}, 0), InputError);
}

TEST_CASE("build_csr: round-trip preserves the edge set", "[graph_core]") {
    TestRand rnd(2024);
    for (int trial = 0; trial < 25; ++trial) {
        const CsrGraph g = testutil::random_graph(rnd, 40);
        REQUIRE(validate(g).empty());

        // The stored set is already closed under symmetry and loops, so a
        // rebuild without either option must reproduce it exactly.
        const auto stored = edge_set(g);
        const CsrGraph rebuilt = build_csr(g.edges(), g.num_nodes, {false, false});
        REQUIRE(edge_set(rebuilt) == stored);
    }
}

TEST_CASE("augmented_degrees: hand examples", "[graph_core]") {
    const CsrGraph path = build_csr({{0, 1}}, 2);
    REQUIRE(augmented_degrees(path).values == std::vector<double>{2.0, 2.0});

    const CsrGraph isolated = build_csr({}, 1);
    REQUIRE(augmented_degrees(isolated).values == std::vector<double>{1.0});

    const CsrGraph k3 = complete_graph(3);
    REQUIRE(augmented_degrees(k3).values == std::vector<double>{3.0, 3.0, 3.0});
}

TEST_CASE("augmented_degrees: sums to nnz and requires self-loops", "[graph_core]") {
    TestRand rnd(7);
    for (int trial = 0; trial < 20; ++trial) {
        const CsrGraph g = testutil::random_graph(rnd, 50);
        const DegreeVector deg = augmented_degrees(g);
        double sum = 0.0;
        for (double v : deg.values) {
            REQUIRE(v >= 1.0);
            sum += v;
        }
        REQUIRE(sum == static_cast<double>(g.nnz()));
    }
    const CsrGraph bare = build_csr({{0, 1}}, 2, {true, false});
    REQUIRE_THROWS_AS(augmented_degrees(bare), ContractError);
}

TEST_CASE("count_edge_triangles: K3, path, K4", "[graph_core]") {
    const CsrGraph k3 = complete_graph(3);
    const TriangleWeights w3 = count_edge_triangles(k3);
    for (Index u = 0; u < 3; ++u)
        for (Index e = k3.row_begin(u); e < k3.row_end(u); ++e) {
            const Index v = k3.col_indices[static_cast<std::size_t>(e)];
            REQUIRE(w3.edge_weights[static_cast<std::size_t>(e)] == (u == v ? 0 : 1));
        }
    REQUIRE(w3.node_totals == std::vector<double>{2.0, 2.0, 2.0});

    const CsrGraph path = build_csr({{0, 1}}, 2);
    const TriangleWeights wp = count_edge_triangles(path);
    REQUIRE(std::all_of(wp.edge_weights.begin(), wp.edge_weights.end(),
                        [](Index w) { return w == 0; }));
    REQUIRE(wp.node_totals == std::vector<double>{0.0, 0.0});

    const CsrGraph k4 = complete_graph(4);
    const TriangleWeights w4 = count_edge_triangles(k4);
    for (Index u = 0; u < 4; ++u)
        for (Index e = k4.row_begin(u); e < k4.row_end(u); ++e) {
            const Index v = k4.col_indices[static_cast<std::size_t>(e)];
            REQUIRE(w4.edge_weights[static_cast<std::size_t>(e)] == (u == v ? 0 : 2));
        }
    REQUIRE(w4.node_totals == std::vector<double>{6.0, 6.0, 6.0, 6.0});
}

TEST_CASE("count_edge_triangles: matches brute force for N <= 50", "[graph_core]") {
    TestRand rnd(99);
    for (int trial = 0; trial < 30; ++trial) {
        const CsrGraph g = testutil::random_graph(rnd, 50);
        const TriangleWeights fast = count_edge_triangles(g);
        const TriangleWeights slow = brute_force_triangles(g);
        REQUIRE(fast.edge_weights == slow.edge_weights);
        REQUIRE(fast.node_totals == slow.node_totals);

        // Symmetry: weight of (u,v) equals weight of (v,u).
        for (Index u = 0; u < g.num_nodes; ++u)
            for (Index e = g.row_begin(u); e < g.row_end(u); ++e) {
                const Index v = g.col_indices[static_cast<std::size_t>(e)];
                if (v == u) continue;
                const auto* first = g.col_indices.data() + g.row_begin(v);
                const auto* last = g.col_indices.data() + g.row_end(v);
                const auto* found = std::lower_bound(first, last, u);
                REQUIRE(found != last);
                const auto rev = static_cast<std::size_t>(found - g.col_indices.data());
                REQUIRE(fast.edge_weights[static_cast<std::size_t>(e)] == fast.edge_weights[rev]);
            }
    }
    const CsrGraph directed = build_csr({{0, 1}}, 2, {false, false});
    REQUIRE_THROWS_AS(count_edge_triangles(directed), ContractError);
}

TEST_CASE("validate: reports specific violations", "[graph_core]") {
    REQUIRE(validate(complete_graph(3)).empty());

    SECTION("asymmetric entry in undirected graph") {
        CsrGraph g = build_csr({{0, 1}}, 2, {true, false});
        // Drop the reverse edge (1,0) by hand.
        g.col_indices = {1};
        g.row_offsets = {0, 1, 1};
        const auto violations = validate(g);
        REQUIRE(violations.size() == 1);
        REQUIRE_THAT(violations[0], Catch::Matchers::ContainsSubstring("(0,1)"));
        REQUIRE_THAT(violations[0], Catch::Matchers::ContainsSubstring("reverse"));
    }
    SECTION("decreasing row_offsets") {
        CsrGraph g = complete_graph(3);
        g.row_offsets[1] = g.row_offsets[2] + 1;
        const auto violations = validate(g);
        REQUIRE_FALSE(violations.empty());
        REQUIRE_THAT(violations[0], Catch::Matchers::ContainsSubstring("decreases"));
    }
    SECTION("column index out of range") {
        CsrGraph g = complete_graph(3);
        g.col_indices[0] = 7;
        const auto violations = validate(g);
        REQUIRE_FALSE(violations.empty());
        REQUIRE_THAT(violations[0], Catch::Matchers::ContainsSubstring("out of range"));
    }
    SECTION("missing self-loop with flag set") {
        CsrGraph g = build_csr({{0, 1}}, 2, {true, false});
        g.has_self_loops = true;
        const auto violations = validate(g);
        REQUIRE_FALSE(violations.empty());
        REQUIRE_THAT(violations[0], Catch::Matchers::ContainsSubstring("self-loop"));
    }
}

TEST_CASE("read_edge_list: comments, separators, errors", "[graph_core]") {
    {
        std::istringstream in("# header\n0\t1\n 2 3 \n\n#x\n4\t0\n");
        const EdgeList edges = read_edge_list(in, "mem");
        REQUIRE(edges == EdgeList{{0, 1}, {2, 3}, {4, 0}});
    }
    {
        std::istringstream in("0\t1\nbroken\n");
        REQUIRE_THROWS_WITH(read_edge_list(in, "mem"),
                            Catch::Matchers::ContainsSubstring("mem:2"));
    }
    {
        std::istringstream in("0\n");
        REQUIRE_THROWS_AS(read_edge_list(in, "mem"), InputError);
    }
    {
        std::istringstream in("0\t1\textra\n");
        REQUIRE_THROWS_WITH(read_edge_list(in, "mem"),
                            Catch::Matchers::ContainsSubstring("trailing"));
    }
    REQUIRE_THROWS_AS(read_edge_list_file("/nonexistent/edges.tsv"), InputError);
}

TEST_CASE("build_csr: Cora edge file listing", "[graph_core][cora]") {
    if (!testutil::has_cora()) {
        SKIP("data/cora not present; run scripts/convert_planetoid.py");
    }
    const EdgeList edges = read_edge_list_file((testutil::cora_dir() / "edges.tsv").string());
    Index max_node = -1;
    for (const auto& [u, v] : edges) max_node = std::max({max_node, u, v});
    REQUIRE(max_node + 1 == 2708);
    // 5429 is the raw citation-file count; the Planetoid pickle distribution
    // deduplicates to 5278 undirected pairs. Both are published conventions.
    REQUIRE((edges.size() == 5429 || edges.size() == 5278));
    const CsrGraph g = build_csr(edges, 2708);
    REQUIRE(validate(g).empty());
}
