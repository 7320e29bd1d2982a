#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "spantree/laplacian.hpp"
#include "spantree/oracle.hpp"
#include "support/fixtures.hpp"

using namespace spantree;
using fixtures::rel_err;

TEST_CASE("build_laplacian undirected entries") {
    Eigen::MatrixXd k3 = build_laplacian(fixtures::complete_graph(3)).dense();
    Eigen::MatrixXd expect(3, 3);
    expect << 2, -1, -1, -1, 2, -1, -1, -1, 2;
    REQUIRE((k3 - expect).cwiseAbs().maxCoeff() == 0.0);

    Eigen::MatrixXd wtri = build_laplacian(fixtures::weighted_triangle()).dense();
    Eigen::MatrixXd we(3, 3);
    we << 4, -1, -3, -1, 3, -2, -3, -2, 5;
    REQUIRE((wtri - we).cwiseAbs().maxCoeff() == 0.0);

    // Row sums vanish and the matrix is symmetric.
    spantree::SplitMix64 rng(3);
    Graph g = fixtures::random_connected_graph(rng, 7);
    Eigen::MatrixXd l = build_laplacian(g).dense();
    REQUIRE(l.rowwise().sum().cwiseAbs().maxCoeff() < 1e-12);
    REQUIRE((l - l.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("Laplacian decomposes into neighborhood and complement parts") {
    spantree::SplitMix64 rng(7);
    for (int round = 0; round < 10; ++round) {
        Graph g = fixtures::random_connected_graph(rng, 3 + static_cast<int>(rng.next() % 5));
        Eigen::MatrixXd full = build_laplacian(g).dense();
        for (NodeId v = 0; v < g.node_count(); ++v) {
            Eigen::MatrixXd sum = build_laplacian(neighborhood_subgraph(g, v)).dense() +
                                  build_laplacian(complement_subgraph(g, v)).dense();
            REQUIRE((sum - full).cwiseAbs().maxCoeff() <= 1e-12);
        }
    }
}

TEST_CASE("build_laplacian directed uses D - A^T") {
    Graph d = build_graph(2, true, {{0, 1, 2.0, 1.0}});
    Eigen::MatrixXd l = build_laplacian(d).dense();
    Eigen::MatrixXd expect(2, 2);
    expect << 2, 0, -2, 0;
    REQUIRE((l - expect).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(l.colwise().sum().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("reduce and determinants") {
    auto k3 = reduce(build_laplacian(fixtures::complete_graph(3)), 2);
    REQUIRE(k3.dim() == 2);
    REQUIRE(rel_err(tree_total_weight(k3), 3.0) < 1e-12);

    auto path = reduce(build_laplacian(fixtures::path_graph(3)), 0);
    REQUIRE(rel_err(tree_total_weight(path), 1.0) < 1e-12);

    auto wtri = reduce(build_laplacian(fixtures::weighted_triangle()), 0);
    REQUIRE(rel_err(tree_total_weight(wtri), 11.0) < 1e-12);

    Graph split = build_graph(4, false, {{0, 1, 1, 1}, {2, 3, 1, 1}});
    REQUIRE_THROWS_AS(reduce(build_laplacian(split), 0), SingularMatrixError);
    SolveOptions allow;
    allow.allow_singular = true;
    auto sys = reduce(build_laplacian(split), 0, allow);
    REQUIRE(sys.singular());
    REQUIRE(tree_total_weight(sys) == 0.0);
    REQUIRE_THROWS_AS(sys.solve(Eigen::VectorXd::Ones(3)), SingularMatrixError);
}

TEST_CASE("cofactor equality across removed nodes") {
    spantree::SplitMix64 rng(17);
    for (int round = 0; round < 25; ++round) {
        Graph g = fixtures::random_connected_graph(rng, 3 + static_cast<int>(rng.next() % 5));
        LaplacianMatrix l = build_laplacian(g);
        const double d0 = tree_total_weight(reduce(l, 0));
        for (NodeId r = 1; r < g.node_count(); ++r)
            REQUIRE(rel_err(tree_total_weight(reduce(l, r)), d0) < 1e-9);
    }
}

TEST_CASE("unweighted determinant equals the enumeration count") {
    spantree::SplitMix64 rng(29);
    for (int round = 0; round < 20; ++round) {
        Graph g = fixtures::random_connected_graph(rng, 3 + static_cast<int>(rng.next() % 6),
                                                   0.5, 1.0, 1.0);  // w = 1
        const double det = tree_total_weight(reduce(build_laplacian(g), 0));
        const auto count = enumerate_spanning_trees(g).size();
        REQUIRE(std::llround(det) == static_cast<long long>(count));
    }
}

TEST_CASE("weighted determinant matches the oracle total") {
    spantree::SplitMix64 rng(31);
    for (int round = 0; round < 20; ++round) {
        Graph g = fixtures::random_connected_graph(rng, 3 + static_cast<int>(rng.next() % 5));
        const double det = tree_total_weight(reduce(build_laplacian(g), 0));
        REQUIRE(rel_err(det, brute_report(g).total_weight) < 1e-9);
    }
}

TEST_CASE("selected inverse entries") {
    auto k3 = reduce(build_laplacian(fixtures::complete_graph(3)), 2);
    Eigen::MatrixXd b = k3.selected_inverse({0, 1});
    REQUIRE(rel_err(b(0, 0), 2.0 / 3.0) < 1e-12);
    REQUIRE(rel_err(b(1, 1), 2.0 / 3.0) < 1e-12);
    REQUIRE(rel_err(b(0, 1), 1.0 / 3.0) < 1e-12);

    auto path = reduce(build_laplacian(fixtures::path_graph(3)), 2);
    Eigen::MatrixXd bp = path.selected_inverse({0, 1});
    Eigen::MatrixXd expect(2, 2);
    expect << 2, 1, 1, 1;
    REQUIRE((bp - expect).cwiseAbs().maxCoeff() < 1e-12);

    auto k4 = reduce(build_laplacian(fixtures::complete_graph(4)), 3);
    REQUIRE(rel_err(k4.selected_inverse({0})(0, 0), 0.5) < 1e-12);

    // Symmetry property on random graphs.
    spantree::SplitMix64 rng(37);
    for (int round = 0; round < 10; ++round) {
        Graph g = fixtures::random_connected_graph(rng, 6);
        auto sys = reduce(build_laplacian(g), 5);
        std::vector<NodeId> s{0, 1, 2, 3, 4};
        Eigen::MatrixXd bs = sys.selected_inverse(s);
        REQUIRE((bs - bs.transpose()).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("trace_product") {
    auto k3 = reduce(build_laplacian(fixtures::complete_graph(3)), 2);
    SparseMatrix id(2, 2);
    id.setIdentity();
    REQUIRE(rel_err(k3.trace_product(id), 4.0 / 3.0) < 1e-12);

    SparseMatrix zero(2, 2);
    REQUIRE(k3.trace_product(zero) == 0.0);

    REQUIRE(rel_err(k3.trace_product(k3.reduced_matrix()), 2.0) < 1e-12);

    SparseMatrix wrong(3, 3);
    REQUIRE_THROWS_AS(k3.trace_product(wrong), DimensionMismatchError);
}

TEST_CASE("solve residuals stay within tolerance") {
    spantree::SplitMix64 rng(41);
    Graph g = fixtures::random_connected_graph(rng, 8);
    auto sys = reduce(build_laplacian(g), 0);
    for (int k = 0; k < 7; ++k) {
        Eigen::VectorXd b = Eigen::VectorXd::Zero(7);
        b(k) = 1.0;
        Eigen::VectorXd x = sys.solve(b);
        REQUIRE((sys.reduced_matrix() * x - b).lpNorm<Eigen::Infinity>() <= 1e-9);
    }
    REQUIRE(sys.max_solve_residual() <= 1e-9);
    REQUIRE(sys.condition_estimate() >= 1.0);
}

TEST_CASE("sparse path agrees with known counts at n >= 64") {
    // Cycle C_n has exactly n spanning trees.
    const int n = 100;
    std::vector<Edge> edges;
    for (NodeId v = 0; v < n; ++v) {
        NodeId u = (v + 1) % n;
        edges.push_back({std::min(v, u), std::max(v, u), 1.0, 1.0});
    }
    Graph cycle = build_graph(n, false, edges);
    auto sys = reduce(build_laplacian(cycle), 0);
    REQUIRE(rel_err(tree_total_weight(sys), 100.0) < 1e-9);

    // Directed cycle: exactly one in-tree per root.
    std::vector<Edge> arcs;
    for (NodeId v = 0; v < n; ++v) arcs.push_back({v, static_cast<NodeId>((v + 1) % n), 1.0, 1.0});
    Graph dcycle = build_graph(n, true, arcs);
    auto dsys = reduce(build_laplacian(dcycle), 7);
    REQUIRE(rel_err(tree_total_weight(dsys), 1.0) < 1e-9);
}

TEST_CASE("log-scale determinant for large graphs") {
    // K_n has n^(n-2) spanning trees; for n = 200 this overflows double.
    const int n = 200;
    Graph kn = fixtures::complete_graph(n);
    auto sys = reduce(build_laplacian(kn), 0);
    auto [log_w, sign] = log_tree_total_weight(sys);
    REQUIRE(sign == 1);
    REQUIRE(rel_err(log_w, (n - 2) * std::log(static_cast<double>(n))) < 1e-10);
    REQUIRE(std::isinf(tree_total_weight(sys)));

    // Still exact in the representable range.
    Graph k30 = fixtures::complete_graph(30);
    auto s30 = reduce(build_laplacian(k30), 3);
    REQUIRE(rel_err(tree_total_weight(s30), std::pow(30.0, 28.0)) < 1e-9);
}

TEST_CASE("directed reduce matches the directed matrix tree theorem") {
    Graph d = fixtures::directed_triangle(1.5, 0.5, 2.0);
    auto sys = reduce(build_laplacian(d), 2);
    REQUIRE(rel_err(tree_total_weight(sys), 1.5 * 2.0 + 0.5 * 2.0) < 1e-12);

    // Root 0 is unreachable: singular.
    REQUIRE_THROWS_AS(reduce(build_laplacian(d), 0), SingularMatrixError);
}
