#pragma once

// Shared fixture graphs and generators for the test suites.

#include <cmath>
#include <cstdint>
#include <vector>

#include "spantree/graph.hpp"
#include "spantree/sampler.hpp"

namespace fixtures {

using spantree::Edge;
using spantree::Graph;
using spantree::NodeId;

/// |a-b| relative to max(|a|, |b|, 1): relative error with an absolute
/// floor of 1 so exact zeros compare cleanly.
inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1.0});
}

inline Graph complete_graph(int n, double w = 1.0, double omega = 1.0) {
    std::vector<Edge> edges;
    for (NodeId u = 0; u < n; ++u)
        for (NodeId v = u + 1; v < n; ++v) edges.push_back({u, v, w, omega});
    return spantree::build_graph(n, false, edges);
}

inline Graph path_graph(int n, double w = 1.0, double omega = 1.0) {
    std::vector<Edge> edges;
    for (NodeId u = 0; u + 1 < n; ++u) edges.push_back({u, static_cast<NodeId>(u + 1), w, omega});
    return spantree::build_graph(n, false, edges);
}

/// Triangle with w(01)=1, w(12)=2, w(02)=3 and unit degree weights.
/// Spanning trees: {01,12} weight 2, {12,02} weight 6, {01,02} weight 3.
inline Graph weighted_triangle() {
    return spantree::build_graph(3, false, {{0, 1, 1.0, 1.0}, {1, 2, 2.0, 1.0}, {0, 2, 3.0, 1.0}});
}

/// Star with center 0.
inline Graph star_graph(int n, double w = 1.0, double omega = 1.0) {
    std::vector<Edge> edges;
    for (NodeId v = 1; v < n; ++v) edges.push_back({0, v, w, omega});
    return spantree::build_graph(n, false, edges);
}

/// Hub 0 joined to a cycle on nodes 1..n-1.
inline Graph wheel_graph(int n, double w = 1.0, double omega = 1.0) {
    std::vector<Edge> edges;
    for (NodeId v = 1; v < n; ++v) edges.push_back({0, v, w, omega});
    for (NodeId v = 1; v < n; ++v) {
        NodeId next = (v == n - 1) ? 1 : v + 1;
        NodeId a = std::min(v, next), b = std::max(v, next);
        edges.push_back({a, b, w, omega});
    }
    return spantree::build_graph(n, false, edges);
}

/// Directed example: 0->2 (w=a), 0->1 (w=b), 1->2 (w=c). Rooted at 2 it
/// has exactly two in-trees, with weights a*c and b*c.
inline Graph directed_triangle(double a, double b, double c) {
    return spantree::build_graph(3, true,
                                 {{0, 2, a, 1.0}, {0, 1, b, 1.0}, {1, 2, c, 1.0}});
}

/// Random connected undirected graph: a random spanning-tree skeleton plus
/// extra edges, weights w in (0.1, 10), omega in (-2, 2) unless overridden.
inline Graph random_connected_graph(spantree::SplitMix64& rng, int n,
                                    double extra_edge_prob = 0.5, double w_lo = 0.1,
                                    double w_hi = 10.0, double om_lo = -2.0,
                                    double om_hi = 2.0) {
    const auto uni = [&](double lo, double hi) { return lo + (hi - lo) * rng.next_double(); };
    std::vector<Edge> edges;
    for (NodeId v = 1; v < n; ++v) {
        NodeId u = static_cast<NodeId>(rng.next() % static_cast<std::uint64_t>(v));
        edges.push_back({std::min(u, v), std::max(u, v), uni(w_lo, w_hi), uni(om_lo, om_hi)});
    }
    for (NodeId u = 0; u < n; ++u)
        for (NodeId v = u + 1; v < n; ++v) {
            bool present = false;
            for (const Edge& e : edges)
                if (e.u == u && e.v == v) present = true;
            if (!present && rng.next_double() < extra_edge_prob)
                edges.push_back({u, v, uni(w_lo, w_hi), uni(om_lo, om_hi)});
        }
    return spantree::build_graph(n, false, edges);
}

/// Random connected undirected graph with integer degree weights in
/// {0,...,om_max}.
inline Graph random_integer_omega_graph(spantree::SplitMix64& rng, int n, int om_max = 3,
                                        double extra_edge_prob = 0.5) {
    Graph base = random_connected_graph(rng, n, extra_edge_prob);
    std::vector<Edge> edges = base.edges();
    for (Edge& e : edges)
        e.omega = static_cast<double>(rng.next() % static_cast<std::uint64_t>(om_max + 1));
    return spantree::build_graph(n, false, edges);
}

/// Random directed graph in which every node reaches `root` (a random
/// in-tree skeleton toward the root plus extra arcs).
inline Graph random_rooted_digraph(spantree::SplitMix64& rng, int n, NodeId root,
                                   double extra_edge_prob = 0.35, double w_lo = 0.1,
                                   double w_hi = 10.0, double om_lo = -2.0,
                                   double om_hi = 2.0) {
    const auto uni = [&](double lo, double hi) { return lo + (hi - lo) * rng.next_double(); };
    // Order nodes with the root last; node order[i] points at some later node.
    std::vector<NodeId> order;
    for (NodeId v = 0; v < n; ++v)
        if (v != root) order.push_back(v);
    for (std::size_t i = order.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.next() % i);
        std::swap(order[i - 1], order[j]);
    }
    order.push_back(root);
    std::vector<Edge> edges;
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        const std::size_t j = i + 1 + static_cast<std::size_t>(
                                          rng.next() % (order.size() - i - 1));
        edges.push_back({order[i], order[j], uni(w_lo, w_hi), uni(om_lo, om_hi)});
    }
    for (NodeId u = 0; u < n; ++u)
        for (NodeId v = 0; v < n; ++v) {
            if (u == v) continue;
            bool present = false;
            for (const Edge& e : edges)
                if (e.u == u && e.v == v) present = true;
            if (!present && rng.next_double() < extra_edge_prob)
                edges.push_back({u, v, uni(w_lo, w_hi), uni(om_lo, om_hi)});
        }
    return spantree::build_graph(n, true, edges);
}

}  // namespace fixtures
