#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "spantree/errors.hpp"

namespace spantree {

/// Dense node index in [0, N).
using NodeId = std::int32_t;

/// An edge carries two independent weights: `w` drives the Gibbs
/// distribution over spanning trees, `omega` defines the weighted degree
/// of its endpoints. `omega` may be zero or negative; `w` is strictly
/// positive for user-built graphs (see build_graph). Node-scaling
/// operations may produce signed `w` on derived graphs; those derived
/// graphs feed the Laplacian machinery, not the sampler.
struct Edge {
    NodeId u = 0;
    NodeId v = 0;
    double w = 1.0;
    double omega = 1.0;
};

/// Immutable simple graph. Undirected edges are canonicalized to u < v and
/// the edge list is sorted lexicographically, so equal graphs have equal
/// edge lists. At most one edge per unordered (undirected) or ordered
/// (directed) node pair; no self-loops.
class Graph {
public:
    Graph(int n_nodes, bool directed, std::vector<Edge> edges)
        : n_nodes_(n_nodes), directed_(directed), edges_(std::move(edges)) {
        if (n_nodes_ < 1)
            throw NodeOutOfRangeError("graph needs at least one node");
        for (Edge& e : edges_) {
            check_node(e.u);
            check_node(e.v);
            if (e.u == e.v)
                throw SelfLoopError("self-loop at node " + std::to_string(e.u));
            if (!directed_ && e.u > e.v) std::swap(e.u, e.v);
        }
        std::sort(edges_.begin(), edges_.end(), [](const Edge& a, const Edge& b) {
            return std::pair(a.u, a.v) < std::pair(b.u, b.v);
        });
        for (std::size_t i = 1; i < edges_.size(); ++i) {
            if (edges_[i - 1].u == edges_[i].u && edges_[i - 1].v == edges_[i].v)
                throw DuplicateEdgeError("duplicate edge (" + std::to_string(edges_[i].u) +
                                         "," + std::to_string(edges_[i].v) + ")");
        }
        incident_.assign(static_cast<std::size_t>(n_nodes_), {});
        if (directed_) out_.assign(static_cast<std::size_t>(n_nodes_), {});
        for (int id = 0; id < static_cast<int>(edges_.size()); ++id) {
            const Edge& e = edges_[static_cast<std::size_t>(id)];
            incident_[static_cast<std::size_t>(e.u)].push_back(id);
            incident_[static_cast<std::size_t>(e.v)].push_back(id);
            if (directed_) out_[static_cast<std::size_t>(e.u)].push_back(id);
        }
    }

    int node_count() const { return n_nodes_; }
    bool directed() const { return directed_; }
    int edge_count() const { return static_cast<int>(edges_.size()); }
    const std::vector<Edge>& edges() const { return edges_; }
    const Edge& edge(int id) const { return edges_[static_cast<std::size_t>(id)]; }

    /// Edge ids touching v. For directed graphs this is the union of in-
    /// and out-edges.
    const std::vector<int>& incident_edges(NodeId v) const {
        check_node(v);
        return incident_[static_cast<std::size_t>(v)];
    }

    /// Out-edge ids of v (directed graphs only).
    const std::vector<int>& out_edges(NodeId v) const {
        check_node(v);
        if (!directed_)
            throw PreconditionViolatedError("out_edges requires a directed graph");
        return out_[static_cast<std::size_t>(v)];
    }

    /// Edge id of (u,v): unordered pair for undirected graphs, ordered for
    /// directed ones.
    std::optional<int> find_edge(NodeId u, NodeId v) const {
        check_node(u);
        check_node(v);
        if (!directed_ && u > v) std::swap(u, v);
        auto it = std::lower_bound(edges_.begin(), edges_.end(), std::pair(u, v),
                                   [](const Edge& e, const std::pair<NodeId, NodeId>& key) {
                                       return std::pair(e.u, e.v) < key;
                                   });
        if (it != edges_.end() && it->u == u && it->v == v)
            return static_cast<int>(it - edges_.begin());
        return std::nullopt;
    }

    std::vector<NodeId> neighbors(NodeId v) const {
        std::vector<NodeId> out;
        for (int id : incident_edges(v)) {
            const Edge& e = edges_[static_cast<std::size_t>(id)];
            out.push_back(e.u == v ? e.v : e.u);
        }
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    void check_node(NodeId v) const {
        if (v < 0 || v >= n_nodes_)
            throw NodeOutOfRangeError("node " + std::to_string(v) + " not in [0, " +
                                      std::to_string(n_nodes_) + ")");
    }

private:
    int n_nodes_;
    bool directed_;
    std::vector<Edge> edges_;
    std::vector<std::vector<int>> incident_;
    std::vector<std::vector<int>> out_;
};

/// Validating entry point for user graphs: rejects non-finite or
/// non-positive probability weights on top of the structural checks done
/// by the Graph constructor.
inline Graph build_graph(int n_nodes, bool directed, const std::vector<Edge>& edges) {
    for (const Edge& e : edges) {
        if (!std::isfinite(e.w) || e.w <= 0.0)
            throw NonPositiveWeightError("probability weight must be finite and > 0 on edge (" +
                                         std::to_string(e.u) + "," + std::to_string(e.v) + ")");
        if (!std::isfinite(e.omega))
            throw NonPositiveWeightError("degree weight must be finite on edge (" +
                                         std::to_string(e.u) + "," + std::to_string(e.v) + ")");
    }
    return Graph(n_nodes, directed, edges);
}

enum class ScaleMode { PowerAlpha, OmegaPower, Custom };

/// Node-scaling operator: multiplies the probability weight of every edge
/// incident to `node` by a per-edge factor.
///   PowerAlpha: factor alpha^omega(e), alpha > 0.
///   OmegaPower: factor omega(e)^p, and all non-incident probability
///               weights are set to 0 (those edges are dropped).
///   Custom:     arbitrary per-edge factor map.
struct ScaleSpec {
    NodeId node = 0;
    ScaleMode mode = ScaleMode::PowerAlpha;
    double alpha = 1.0;
    int power = 1;
    std::function<double(const Edge&)> factor;

    static ScaleSpec power_alpha(NodeId node, double alpha) {
        if (!(alpha > 0.0))
            throw PreconditionViolatedError("power_alpha requires alpha > 0");
        ScaleSpec s;
        s.node = node;
        s.mode = ScaleMode::PowerAlpha;
        s.alpha = alpha;
        return s;
    }

    static ScaleSpec omega_power(NodeId node, int p) {
        if (p < 0)
            throw PreconditionViolatedError("omega_power requires p >= 0");
        ScaleSpec s;
        s.node = node;
        s.mode = ScaleMode::OmegaPower;
        s.power = p;
        return s;
    }

    static ScaleSpec custom(NodeId node, std::function<double(const Edge&)> factor) {
        ScaleSpec s;
        s.node = node;
        s.mode = ScaleMode::Custom;
        s.factor = std::move(factor);
        return s;
    }
};

/// Returns G with the probability weights of edges incident to spec.node
/// rescaled. Edges whose weight becomes exactly 0 are removed from the
/// edge set; OmegaPower additionally removes every non-incident edge.
/// Scaled graphs may carry negative probability weights (e.g. OmegaPower
/// with negative omega); they are valid inputs to the Laplacian builders
/// and the enumeration oracle but not to the sampler.
inline Graph scale_at_node(const Graph& g, const ScaleSpec& spec) {
    g.check_node(spec.node);
    std::vector<Edge> out;
    out.reserve(g.edges().size());
    for (const Edge& e : g.edges()) {
        const bool incident = (e.u == spec.node || e.v == spec.node);
        if (!incident) {
            if (spec.mode != ScaleMode::OmegaPower) out.push_back(e);
            continue;
        }
        Edge scaled = e;
        switch (spec.mode) {
            case ScaleMode::PowerAlpha:
                scaled.w = e.w * std::pow(spec.alpha, e.omega);
                break;
            case ScaleMode::OmegaPower:
                scaled.w = e.w * std::pow(e.omega, spec.power);
                break;
            case ScaleMode::Custom:
                scaled.w = e.w * spec.factor(e);
                break;
        }
        if (scaled.w != 0.0) out.push_back(scaled);
    }
    return Graph(g.node_count(), g.directed(), std::move(out));
}

/// G with every probability weight multiplied by omega(e)^p; zero-weight
/// edges are dropped. This is the whole-graph analogue of OmegaPower used
/// by the additively-decomposable moment formulas.
inline Graph scale_all_by_omega(const Graph& g, int p) {
    if (p < 0) throw PreconditionViolatedError("scale_all_by_omega requires p >= 0");
    std::vector<Edge> out;
    out.reserve(g.edges().size());
    for (const Edge& e : g.edges()) {
        Edge scaled = e;
        scaled.w = e.w * std::pow(e.omega, p);
        if (scaled.w != 0.0) out.push_back(scaled);
    }
    return Graph(g.node_count(), g.directed(), std::move(out));
}

/// Subgraph on the same node set keeping only the edges incident to v.
inline Graph neighborhood_subgraph(const Graph& g, NodeId v) {
    g.check_node(v);
    std::vector<Edge> out;
    for (const Edge& e : g.edges())
        if (e.u == v || e.v == v) out.push_back(e);
    return Graph(g.node_count(), g.directed(), std::move(out));
}

/// Complement of the neighborhood subgraph: all edges not incident to v.
inline Graph complement_subgraph(const Graph& g, NodeId v) {
    g.check_node(v);
    std::vector<Edge> out;
    for (const Edge& e : g.edges())
        if (e.u != v && e.v != v) out.push_back(e);
    return Graph(g.node_count(), g.directed(), std::move(out));
}

/// Sum of degree weights over the edges incident to v (in- and out-edges
/// for directed graphs).
inline double weighted_degree(const Graph& g, NodeId v) {
    double sum = 0.0;
    for (int id : g.incident_edges(v)) sum += g.edge(id).omega;
    return sum;
}

/// Connectivity ignoring edge orientation.
inline bool is_connected(const Graph& g) {
    const int n = g.node_count();
    if (n <= 1) return true;
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::vector<NodeId> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
        NodeId u = stack.back();
        stack.pop_back();
        for (int id : g.incident_edges(u)) {
            const Edge& e = g.edge(id);
            NodeId other = (e.u == u) ? e.v : e.u;
            if (!seen[static_cast<std::size_t>(other)]) {
                seen[static_cast<std::size_t>(other)] = 1;
                ++count;
                stack.push_back(other);
            }
        }
    }
    return count == n;
}

/// True when every node has a directed path to `root` (trivially true for
/// undirected connected graphs).
inline bool all_nodes_reach(const Graph& g, NodeId root) {
    g.check_node(root);
    if (!g.directed()) return is_connected(g);
    const int n = g.node_count();
    // BFS from root over reversed edges.
    std::vector<std::vector<NodeId>> rev(static_cast<std::size_t>(n));
    for (const Edge& e : g.edges()) rev[static_cast<std::size_t>(e.v)].push_back(e.u);
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::vector<NodeId> stack{root};
    seen[static_cast<std::size_t>(root)] = 1;
    int count = 1;
    while (!stack.empty()) {
        NodeId u = stack.back();
        stack.pop_back();
        for (NodeId p : rev[static_cast<std::size_t>(u)]) {
            if (!seen[static_cast<std::size_t>(p)]) {
                seen[static_cast<std::size_t>(p)] = 1;
                ++count;
                stack.push_back(p);
            }
        }
    }
    return count == n;
}

}  // namespace spantree
