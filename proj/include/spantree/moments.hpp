#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "spantree/errors.hpp"
#include "spantree/graph.hpp"
#include "spantree/laplacian.hpp"

namespace spantree {

/// Expectation and variance of one node's weighted degree under the Gibbs
/// distribution over spanning (in-)trees.
struct DegreeMoments {
    NodeId node = 0;
    double expectation = 0.0;
    double variance = 0.0;
};

struct EdgeProbability {
    NodeId u = 0;
    NodeId v = 0;
    double probability = 0.0;
};

/// Default removed node for undirected graphs: the node with the largest
/// probability-weighted degree, which keeps the reduced system best
/// conditioned. Directed graphs have no default; the root is part of the
/// problem statement there.
inline NodeId default_root(const Graph& g) {
    if (g.directed())
        throw RootRequiredError("directed graphs require an explicit root");
    NodeId best = 0;
    double best_deg = -1.0;
    for (NodeId v = 0; v < g.node_count(); ++v) {
        double d = 0.0;
        for (int id : g.incident_edges(v)) d += g.edge(id).w;
        if (d > best_deg) {
            best_deg = d;
            best = v;
        }
    }
    return best;
}

namespace detail {

inline NodeId resolve_root(const Graph& g, std::optional<NodeId> r) {
    if (g.directed()) {
        if (!r) throw RootRequiredError("directed graphs require an explicit root");
        g.check_node(*r);
        return *r;
    }
    if (r) {
        g.check_node(*r);
        return *r;
    }
    return default_root(g);
}

inline void require_moment_preconditions(const Graph& g, NodeId root) {
    if (g.node_count() < 2)
        throw PreconditionViolatedError("moment computations need at least 2 nodes");
    if (g.directed()) {
        if (!all_nodes_reach(g, root))
            throw DisconnectedError("not every node reaches root " + std::to_string(root));
    } else if (!is_connected(g)) {
        throw DisconnectedError("graph is not connected");
    }
}

/// M restricted to S x S as a dense block, S given in node ids.
inline Eigen::MatrixXd submatrix(const SparseMatrix& m, const std::vector<NodeId>& nodes,
                                 int n_full) {
    std::vector<int> pos(static_cast<std::size_t>(n_full), -1);
    for (int i = 0; i < static_cast<int>(nodes.size()); ++i)
        pos[static_cast<std::size_t>(nodes[static_cast<std::size_t>(i)])] = i;
    Eigen::MatrixXd out =
        Eigen::MatrixXd::Zero(static_cast<int>(nodes.size()), static_cast<int>(nodes.size()));
    for (int k = 0; k < m.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(m, k); it; ++it) {
            const int i = pos[static_cast<std::size_t>(it.row())];
            const int j = pos[static_cast<std::size_t>(it.col())];
            if (i >= 0 && j >= 0) out(i, j) += it.value();
        }
    return out;
}

/// Support of the trace formulas for node v: {v} and its neighbors, minus
/// the removed node. All scaled-neighborhood Laplacians of v live on this
/// index set.
inline std::vector<NodeId> moment_support(const Graph& g, NodeId v, NodeId root) {
    std::vector<NodeId> s = g.neighbors(v);
    s.push_back(v);
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    s.erase(std::remove(s.begin(), s.end(), root), s.end());
    return s;
}

inline double clamp_variance(double var, double magnitude) {
    const double tol = 1e-8 * std::max(1.0, magnitude);
    if (var < -tol)
        throw NumericalFailureError("variance " + std::to_string(var) +
                                    " is negative beyond tolerance");
    return std::max(var, 0.0);
}

struct MomentWorkspace {
    MomentWorkspace(const Graph& g, std::optional<NodeId> r, const SolveOptions& opts)
        : graph(g), root(resolve_root(g, r)) {
        require_moment_preconditions(g, root);
        sys.emplace(build_laplacian(g), root, opts);
    }
    const Graph& graph;
    NodeId root;
    std::optional<ReducedLaplacianSystem> sys;
};

inline double expected_degree_impl(const MomentWorkspace& ws, NodeId v) {
    const Graph& g = ws.graph;
    const std::vector<NodeId> s = moment_support(g, v, ws.root);
    if (s.empty()) return 0.0;
    const LaplacianMatrix l1 = build_laplacian(scale_at_node(g, ScaleSpec::omega_power(v, 1)));
    const Eigen::MatrixXd m1 = submatrix(l1.sparse(), s, g.node_count());
    const Eigen::MatrixXd b = ws.sys->selected_inverse(s);
    return (m1 * b).trace();
}

inline double degree_variance_impl(const MomentWorkspace& ws, NodeId v) {
    const Graph& g = ws.graph;
    const std::vector<NodeId> s = moment_support(g, v, ws.root);
    if (s.empty()) return 0.0;
    const LaplacianMatrix l1 = build_laplacian(scale_at_node(g, ScaleSpec::omega_power(v, 1)));
    const LaplacianMatrix l2 = build_laplacian(scale_at_node(g, ScaleSpec::omega_power(v, 2)));
    const Eigen::MatrixXd m1 = submatrix(l1.sparse(), s, g.node_count());
    const Eigen::MatrixXd m2 = submatrix(l2.sparse(), s, g.node_count());
    const Eigen::MatrixXd b = ws.sys->selected_inverse(s);
    const Eigen::MatrixXd m1b = m1 * b;
    const double t1 = (m2 * b).trace();
    const double t2 = (m1b * m1b).trace();
    return clamp_variance(t1 - t2, std::abs(t1) + std::abs(t2));
}

}  // namespace detail

/// E[deg_v(T, omega)] = Tr[(L_v^(1))^[r] (L_G^[r])^{-1}], where L_v^(1) is
/// the Laplacian of the neighborhood of v with probability weights w*omega.
/// Cost is O(deg v) solves against the factorized reduced Laplacian.
inline double expected_degree(const Graph& g, NodeId v, std::optional<NodeId> r = {},
                              const SolveOptions& opts = {}) {
    g.check_node(v);
    detail::MomentWorkspace ws(g, r, opts);
    return detail::expected_degree_impl(ws, v);
}

/// Var[deg_v] = Tr[((L_v^(2))^[r] - (L_v^(1))^[r](L^[r])^{-1}(L_v^(1))^[r])(L^[r])^{-1}].
/// Tiny negative results (within tolerance of zero) are clamped; anything
/// beyond tolerance raises NumericalFailure.
inline double degree_variance(const Graph& g, NodeId v, std::optional<NodeId> r = {},
                              const SolveOptions& opts = {}) {
    g.check_node(v);
    detail::MomentWorkspace ws(g, r, opts);
    return detail::degree_variance_impl(ws, v);
}

/// Expectation and variance with a single factorization.
inline DegreeMoments degree_moments(const Graph& g, NodeId v, std::optional<NodeId> r = {},
                                    const SolveOptions& opts = {}) {
    g.check_node(v);
    detail::MomentWorkspace ws(g, r, opts);
    return DegreeMoments{v, detail::expected_degree_impl(ws, v),
                         detail::degree_variance_impl(ws, v)};
}

/// Cov(deg_v, deg_u). The cross term is the Laplacian of the edge(s)
/// joining u and v scaled by w*omega^2, or the zero matrix when (u,v) is
/// not an edge.
inline double degree_covariance(const Graph& g, NodeId v, NodeId u,
                                std::optional<NodeId> r = {}, const SolveOptions& opts = {}) {
    g.check_node(v);
    g.check_node(u);
    if (u == v) throw SameNodeError("covariance requires two distinct nodes");
    detail::MomentWorkspace ws(g, r, opts);

    std::vector<NodeId> s = g.neighbors(v);
    const std::vector<NodeId> nu = g.neighbors(u);
    s.insert(s.end(), nu.begin(), nu.end());
    s.push_back(v);
    s.push_back(u);
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    s.erase(std::remove(s.begin(), s.end(), ws.root), s.end());
    if (s.empty()) return 0.0;

    const int n = g.node_count();
    const LaplacianMatrix lv = build_laplacian(scale_at_node(g, ScaleSpec::omega_power(v, 1)));
    const LaplacianMatrix lu = build_laplacian(scale_at_node(g, ScaleSpec::omega_power(u, 1)));
    const LaplacianMatrix lvu2 = build_laplacian(
        neighborhood_subgraph(scale_at_node(g, ScaleSpec::omega_power(v, 2)), u));
    const Eigen::MatrixXd mv = detail::submatrix(lv.sparse(), s, n);
    const Eigen::MatrixXd mu = detail::submatrix(lu.sparse(), s, n);
    const Eigen::MatrixXd mvu2 = detail::submatrix(lvu2.sparse(), s, n);
    const Eigen::MatrixXd b = ws.sys->selected_inverse(s);
    return (mvu2 * b).trace() - (mv * b * mu * b).trace();
}

namespace detail {

/// Edge presence probability from selected entries of the reduced inverse.
/// `b` holds (L^[r])^{-1} over the node list `s`; absent rows/columns of
/// the removed node r reduce the expression to the documented one-term
/// branches (and to 0 for a directed edge leaving the root).
inline double edge_probability_from_entries(const Graph& g, const Edge& e,
                                            const Eigen::MatrixXd& b,
                                            const std::vector<NodeId>& s, NodeId root) {
    const auto idx = [&](NodeId x) -> int {
        auto it = std::find(s.begin(), s.end(), x);
        return it == s.end() ? -1 : static_cast<int>(it - s.begin());
    };
    const int iu = idx(e.u);
    const int iv = idx(e.v);
    double p = 0.0;
    if (g.directed()) {
        // In an in-tree rooted at r the root has no outgoing edge.
        if (e.u == root) return 0.0;
        if (e.v == root)
            p = e.w * b(iu, iu);
        else
            p = e.w * (b(iu, iu) - b(iu, iv));
    } else {
        if (e.u == root)
            p = e.w * b(iv, iv);
        else if (e.v == root)
            p = e.w * b(iu, iu);
        else
            p = e.w * (b(iu, iu) + b(iv, iv) - 2.0 * b(iu, iv));
    }
    const double tol = 1e-8;
    if (p < -tol || p > 1.0 + tol)
        throw NumericalFailureError("edge probability " + std::to_string(p) +
                                    " outside [0,1] beyond tolerance");
    return std::clamp(p, 0.0, 1.0);
}

}  // namespace detail

/// Pr(e in T) for an existing edge e = (u,v); undirected pairs are
/// unordered, directed pairs are ordered tail,head.
inline double edge_probability(const Graph& g, NodeId u, NodeId v,
                               std::optional<NodeId> r = {}, const SolveOptions& opts = {}) {
    const std::optional<int> id = g.find_edge(u, v);
    if (!id)
        throw EdgeNotFoundError("edge (" + std::to_string(u) + "," + std::to_string(v) +
                                ") not in graph");
    const Edge& e = g.edge(*id);
    detail::MomentWorkspace ws(g, r, opts);
    std::vector<NodeId> s;
    if (e.u != ws.root) s.push_back(e.u);
    if (e.v != ws.root) s.push_back(e.v);
    std::sort(s.begin(), s.end());
    const Eigen::MatrixXd b = ws.sys->selected_inverse(s);
    return detail::edge_probability_from_entries(g, e, b, s, ws.root);
}

/// Presence probability of every edge, sharing one factorization.
inline std::vector<EdgeProbability> all_edge_probabilities(const Graph& g,
                                                           std::optional<NodeId> r = {},
                                                           const SolveOptions& opts = {}) {
    detail::MomentWorkspace ws(g, r, opts);
    std::vector<NodeId> s;
    for (NodeId x = 0; x < g.node_count(); ++x)
        if (x != ws.root) s.push_back(x);
    const Eigen::MatrixXd b = ws.sys->selected_inverse(s);
    std::vector<EdgeProbability> out;
    out.reserve(g.edges().size());
    for (const Edge& e : g.edges())
        out.push_back({e.u, e.v, detail::edge_probability_from_entries(g, e, b, s, ws.root)});
    return out;
}

/// E[deg_v] as the omega-weighted sum of edge presence probabilities over
/// the edges incident to v. Cross-validation path for expected_degree.
inline double expected_degree_via_edges(const Graph& g, NodeId v, std::optional<NodeId> r = {},
                                        const SolveOptions& opts = {}) {
    g.check_node(v);
    detail::MomentWorkspace ws(g, r, opts);
    const std::vector<NodeId> s = detail::moment_support(g, v, ws.root);
    if (s.empty()) return 0.0;
    const Eigen::MatrixXd b = ws.sys->selected_inverse(s);
    double sum = 0.0;
    for (int id : g.incident_edges(v)) {
        const Edge& e = g.edge(id);
        sum += e.omega * detail::edge_probability_from_entries(g, e, b, s, ws.root);
    }
    return sum;
}

/// E[sum_{e in T} omega(e)] = Tr[L_{G x omega}^[r] (L_G^[r])^{-1}], the
/// expectation of an additively decomposable edge function.
inline double decomposable_expectation(const Graph& g, std::optional<NodeId> r = {},
                                       const SolveOptions& opts = {}) {
    detail::MomentWorkspace ws(g, r, opts);
    const LaplacianMatrix lw = build_laplacian(scale_all_by_omega(g, 1));
    return ws.sys->trace_product(reduced_matrix(lw, *ws.sys));
}

/// Var[sum_{e in T} omega(e)] via the companion trace expression with
/// L_{G x omega^2}; needs the full reduced inverse, so cost is N-1 solves.
inline double decomposable_variance(const Graph& g, std::optional<NodeId> r = {},
                                    const SolveOptions& opts = {}) {
    detail::MomentWorkspace ws(g, r, opts);
    std::vector<NodeId> s;
    for (NodeId x = 0; x < g.node_count(); ++x)
        if (x != ws.root) s.push_back(x);
    const int n = g.node_count();
    const LaplacianMatrix lw = build_laplacian(scale_all_by_omega(g, 1));
    const LaplacianMatrix lw2 = build_laplacian(scale_all_by_omega(g, 2));
    const Eigen::MatrixXd m1 = detail::submatrix(lw.sparse(), s, n);
    const Eigen::MatrixXd m2 = detail::submatrix(lw2.sparse(), s, n);
    const Eigen::MatrixXd b = ws.sys->selected_inverse(s);
    const Eigen::MatrixXd m1b = m1 * b;
    const double t1 = (m2 * b).trace();
    const double t2 = (m1b * m1b).trace();
    return detail::clamp_variance(t1 - t2, std::abs(t1) + std::abs(t2));
}

/// Closed-form moments for a node adjacent to every other node with
/// constant weights w = kappa1, omega = kappa2 on its incident edges:
/// sums over the eigenvalues of the Laplacian of G with v removed. This is
/// an independent validation path for the trace formulas, not a fast path.
inline std::pair<double, double> spectral_full_neighbor_moments(const Graph& g, NodeId v,
                                                                double kappa1, double kappa2) {
    g.check_node(v);
    if (g.directed())
        throw PreconditionViolatedError("spectral moments are defined for undirected graphs");
    if (g.node_count() < 2)
        throw PreconditionViolatedError("moment computations need at least 2 nodes");
    if (!(kappa1 > 0.0)) throw PreconditionViolatedError("kappa1 must be positive");
    const std::vector<NodeId> nb = g.neighbors(v);
    if (static_cast<int>(nb.size()) != g.node_count() - 1)
        throw PreconditionViolatedError("node " + std::to_string(v) +
                                        " is not adjacent to every other node");
    for (int id : g.incident_edges(v)) {
        const Edge& e = g.edge(id);
        if (std::abs(e.w - kappa1) > 1e-12 * std::max(1.0, std::abs(kappa1)) ||
            std::abs(e.omega - kappa2) > 1e-12 * std::max(1.0, std::abs(kappa2)))
            throw PreconditionViolatedError(
                "incident edge weights are not constant (kappa1, kappa2)");
    }

    // Laplacian of G with v removed, on reindexed nodes.
    const int n = g.node_count() - 1;
    std::vector<int> pos(static_cast<std::size_t>(g.node_count()), -1);
    for (NodeId x = 0, row = 0; x < g.node_count(); ++x)
        if (x != v) pos[static_cast<std::size_t>(x)] = row++;
    Eigen::MatrixXd lbar = Eigen::MatrixXd::Zero(n, n);
    for (const Edge& e : g.edges()) {
        if (e.u == v || e.v == v) continue;
        const int a = pos[static_cast<std::size_t>(e.u)];
        const int b = pos[static_cast<std::size_t>(e.v)];
        lbar(a, a) += e.w;
        lbar(b, b) += e.w;
        lbar(a, b) -= e.w;
        lbar(b, a) -= e.w;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(lbar, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
        throw NumericalFailureError("eigenvalue computation failed");
    double expectation = 0.0;
    double variance = 0.0;
    for (int i = 0; i < n; ++i) {
        const double lambda = std::max(es.eigenvalues()(i), 0.0);
        const double denom = lambda + kappa1;
        expectation += kappa1 * kappa2 / denom;
        variance += kappa1 * kappa2 * kappa2 * lambda / (denom * denom);
    }
    return {expectation, variance};
}

}  // namespace spantree
