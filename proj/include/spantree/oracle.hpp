#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/multiprecision/cpp_int.hpp>

#include "spantree/errors.hpp"
#include "spantree/graph.hpp"

namespace spantree {

/// One spanning tree (undirected) or spanning in-tree (directed): the edge
/// ids that make it up and the product of their probability weights.
struct TreeSample {
    std::vector<int> edge_ids;
    double weight = 1.0;
};

inline constexpr long long kDefaultTreeCap = 1'000'000;

namespace detail {

class DisjointSet {
public:
    explicit DisjointSet(int n) : parent_(static_cast<std::size_t>(n)) {
        for (int i = 0; i < n; ++i) parent_[static_cast<std::size_t>(i)] = i;
    }
    int find(int x) {
        while (parent_[static_cast<std::size_t>(x)] != x) {
            parent_[static_cast<std::size_t>(x)] =
                parent_[static_cast<std::size_t>(parent_[static_cast<std::size_t>(x)])];
            x = parent_[static_cast<std::size_t>(x)];
        }
        return x;
    }
    bool unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        parent_[static_cast<std::size_t>(a)] = b;
        return true;
    }

private:
    std::vector<int> parent_;
};

// Contraction/deletion recursion over the edge list in index order. The
// exclude branch is taken only if the remaining edges can still connect
// the current forest, so every leaf of the recursion emits a tree and the
// output order is the lexicographic order of edge-id subsets.
class UndirectedTreeEnumerator {
public:
    UndirectedTreeEnumerator(const Graph& g, long long cap,
                             const std::function<void(const TreeSample&)>& emit)
        : g_(g), cap_(cap), emit_(emit) {}

    void run() {
        if (g_.node_count() == 1) {
            emit_count_checked(TreeSample{{}, 1.0});
            return;
        }
        if (!is_connected(g_)) throw DisconnectedError("graph is not connected");
        chosen_.clear();
        recurse(0, DisjointSet(g_.node_count()), 1.0, g_.node_count() - 1);
    }

private:
    void recurse(int pos, DisjointSet dsu, double weight, int needed) {
        if (needed == 0) {
            emit_count_checked(TreeSample{chosen_, weight});
            return;
        }
        if (pos >= g_.edge_count()) return;
        const Edge& e = g_.edge(pos);
        if (dsu.find(e.u) != dsu.find(e.v)) {
            DisjointSet with = dsu;
            with.unite(e.u, e.v);
            chosen_.push_back(pos);
            recurse(pos + 1, std::move(with), weight * e.w, needed - 1);
            chosen_.pop_back();
        }
        if (still_connectable(pos + 1, dsu, needed)) recurse(pos + 1, dsu, weight, needed);
    }

    bool still_connectable(int from, DisjointSet dsu, int needed) {
        int merges = 0;
        for (int id = from; id < g_.edge_count() && merges < needed; ++id) {
            const Edge& e = g_.edge(id);
            if (dsu.unite(e.u, e.v)) ++merges;
        }
        return merges == needed;
    }

    void emit_count_checked(const TreeSample& t) {
        if (++count_ > cap_)
            throw CapExceededError("spanning tree count exceeds cap " + std::to_string(cap_));
        emit_(t);
    }

    const Graph& g_;
    long long cap_;
    const std::function<void(const TreeSample&)>& emit_;
    std::vector<int> chosen_;
    long long count_ = 0;
};

// In-trees rooted at `root`: every non-root node picks exactly one
// out-edge and the resulting functional graph must be acyclic, which at a
// full assignment is equivalent to every node reaching the root.
class DirectedTreeEnumerator {
public:
    DirectedTreeEnumerator(const Graph& g, NodeId root, long long cap,
                           const std::function<void(const TreeSample&)>& emit)
        : g_(g), root_(root), cap_(cap), emit_(emit) {}

    void run() {
        if (!all_nodes_reach(g_, root_))
            throw DisconnectedError("not every node reaches root " + std::to_string(root_));
        const int n = g_.node_count();
        order_.clear();
        for (NodeId v = 0; v < n; ++v)
            if (v != root_) order_.push_back(v);
        choice_.assign(static_cast<std::size_t>(n), -1);
        recurse(0, 1.0);
    }

private:
    void recurse(std::size_t idx, double weight) {
        if (idx == order_.size()) {
            TreeSample t;
            for (NodeId v : order_) t.edge_ids.push_back(choice_[static_cast<std::size_t>(v)]);
            std::sort(t.edge_ids.begin(), t.edge_ids.end());
            t.weight = weight;
            if (++count_ > cap_)
                throw CapExceededError("in-tree count exceeds cap " + std::to_string(cap_));
            emit_(t);
            return;
        }
        NodeId v = order_[idx];
        for (int id : g_.out_edges(v)) {
            choice_[static_cast<std::size_t>(v)] = id;
            if (!creates_cycle(v)) recurse(idx + 1, weight * g_.edge(id).w);
        }
        choice_[static_cast<std::size_t>(v)] = -1;
    }

    // Follow successor pointers from v; a cycle can only pass through v
    // because earlier nodes were already checked.
    bool creates_cycle(NodeId v) {
        NodeId cur = v;
        while (true) {
            int id = choice_[static_cast<std::size_t>(cur)];
            if (id < 0 || cur == root_) return false;
            cur = g_.edge(id).v;
            if (cur == v) return true;
        }
    }

    const Graph& g_;
    NodeId root_;
    long long cap_;
    const std::function<void(const TreeSample&)>& emit_;
    std::vector<NodeId> order_;
    std::vector<int> choice_;
    long long count_ = 0;
};

struct KahanSum {
    double sum = 0.0;
    double carry = 0.0;
    void add(double x) {
        double y = x - carry;
        double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
};

}  // namespace detail

/// Visits every spanning tree (undirected) or spanning in-tree rooted at
/// `root` (directed, root mandatory) exactly once, in deterministic order.
/// Throws CapExceeded once the running count passes `cap`.
inline void for_each_spanning_tree(const Graph& g, std::optional<NodeId> root,
                                   long long cap,
                                   const std::function<void(const TreeSample&)>& visit) {
    if (g.directed()) {
        if (!root) throw RootRequiredError("directed enumeration requires a root");
        g.check_node(*root);
        detail::DirectedTreeEnumerator(g, *root, cap, visit).run();
    } else {
        detail::UndirectedTreeEnumerator(g, cap, visit).run();
    }
}

inline std::vector<TreeSample> enumerate_spanning_trees(const Graph& g,
                                                        std::optional<NodeId> root = {},
                                                        long long cap = kDefaultTreeCap) {
    std::vector<TreeSample> out;
    for_each_spanning_tree(g, root, cap, [&](const TreeSample& t) { out.push_back(t); });
    return out;
}

/// Ground-truth summary computed by direct summation over all spanning
/// (in-)trees: Gibbs-weighted degree moments, pairwise covariances, degree
/// distributions (integer degree weights only) and edge presence
/// probabilities.
struct ExhaustiveReport {
    long long tree_count = 0;
    double total_weight = 0.0;
    std::vector<double> expected_degree;
    std::vector<double> degree_variance;
    Eigen::MatrixXd covariance;  // variance on the diagonal
    bool integer_omega = false;
    std::vector<std::map<long long, double>> degree_distribution;
    std::vector<double> edge_probability;  // indexed by edge id
};

namespace detail {

inline bool omega_is_integer(const Graph& g) {
    for (const Edge& e : g.edges())
        if (std::abs(e.omega - std::llround(e.omega)) > 1e-9) return false;
    return true;
}

}  // namespace detail

/// When `exact_rational` is set, all accumulation runs in arbitrary-
/// precision rational arithmetic (doubles convert exactly) and results are
/// rounded once at the end; useful for bit-stable small fixtures.
inline ExhaustiveReport brute_report(const Graph& g, std::optional<NodeId> root = {},
                                     long long cap = kDefaultTreeCap,
                                     bool exact_rational = false) {
    const int n = g.node_count();
    const int m = g.edge_count();
    ExhaustiveReport rep;
    rep.integer_omega = detail::omega_is_integer(g);

    std::vector<double> deg(static_cast<std::size_t>(n));

    if (exact_rational) {
        using Rational = boost::multiprecision::cpp_rational;
        Rational total = 0;
        std::vector<Rational> s1(static_cast<std::size_t>(n), 0);
        std::vector<Rational> edge_w(static_cast<std::size_t>(m), 0);
        std::vector<Rational> cross(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0);
        std::vector<std::map<long long, Rational>> dist(static_cast<std::size_t>(n));
        for_each_spanning_tree(g, root, cap, [&](const TreeSample& t) {
            ++rep.tree_count;
            Rational w = 1;
            std::fill(deg.begin(), deg.end(), 0.0);
            for (int id : t.edge_ids) {
                const Edge& e = g.edge(id);
                w *= Rational(e.w);
                deg[static_cast<std::size_t>(e.u)] += e.omega;
                deg[static_cast<std::size_t>(e.v)] += e.omega;
            }
            total += w;
            for (int id : t.edge_ids) edge_w[static_cast<std::size_t>(id)] += w;
            for (int a = 0; a < n; ++a) {
                s1[static_cast<std::size_t>(a)] += w * Rational(deg[static_cast<std::size_t>(a)]);
                for (int b = a; b < n; ++b)
                    cross[static_cast<std::size_t>(a * n + b)] +=
                        w * Rational(deg[static_cast<std::size_t>(a)] * deg[static_cast<std::size_t>(b)]);
                if (rep.integer_omega)
                    dist[static_cast<std::size_t>(a)][std::llround(deg[static_cast<std::size_t>(a)])] += w;
            }
        });
        rep.total_weight = static_cast<double>(total);
        rep.expected_degree.resize(static_cast<std::size_t>(n));
        rep.degree_variance.resize(static_cast<std::size_t>(n));
        rep.covariance = Eigen::MatrixXd::Zero(n, n);
        for (int a = 0; a < n; ++a) {
            Rational ea = s1[static_cast<std::size_t>(a)] / total;
            rep.expected_degree[static_cast<std::size_t>(a)] = static_cast<double>(ea);
            for (int b = a; b < n; ++b) {
                Rational eb = s1[static_cast<std::size_t>(b)] / total;
                Rational cov = cross[static_cast<std::size_t>(a * n + b)] / total - ea * eb;
                rep.covariance(a, b) = rep.covariance(b, a) = static_cast<double>(cov);
            }
            rep.degree_variance[static_cast<std::size_t>(a)] = rep.covariance(a, a);
        }
        if (rep.integer_omega) {
            rep.degree_distribution.resize(static_cast<std::size_t>(n));
            for (int a = 0; a < n; ++a)
                for (const auto& [k, wk] : dist[static_cast<std::size_t>(a)])
                    rep.degree_distribution[static_cast<std::size_t>(a)][k] =
                        static_cast<double>(wk / total);
        }
        rep.edge_probability.resize(static_cast<std::size_t>(m));
        for (int id = 0; id < m; ++id)
            rep.edge_probability[static_cast<std::size_t>(id)] =
                static_cast<double>(edge_w[static_cast<std::size_t>(id)] / total);
        return rep;
    }

    detail::KahanSum total;
    std::vector<detail::KahanSum> s1(static_cast<std::size_t>(n));
    std::vector<detail::KahanSum> edge_w(static_cast<std::size_t>(m));
    std::vector<detail::KahanSum> cross(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
    std::vector<std::map<long long, detail::KahanSum>> dist(static_cast<std::size_t>(n));
    for_each_spanning_tree(g, root, cap, [&](const TreeSample& t) {
        ++rep.tree_count;
        std::fill(deg.begin(), deg.end(), 0.0);
        for (int id : t.edge_ids) {
            const Edge& e = g.edge(id);
            deg[static_cast<std::size_t>(e.u)] += e.omega;
            deg[static_cast<std::size_t>(e.v)] += e.omega;
        }
        total.add(t.weight);
        for (int id : t.edge_ids) edge_w[static_cast<std::size_t>(id)].add(t.weight);
        for (int a = 0; a < n; ++a) {
            s1[static_cast<std::size_t>(a)].add(t.weight * deg[static_cast<std::size_t>(a)]);
            for (int b = a; b < n; ++b)
                cross[static_cast<std::size_t>(a * n + b)].add(
                    t.weight * deg[static_cast<std::size_t>(a)] * deg[static_cast<std::size_t>(b)]);
            if (rep.integer_omega)
                dist[static_cast<std::size_t>(a)][std::llround(deg[static_cast<std::size_t>(a)])]
                    .add(t.weight);
        }
    });
    rep.total_weight = total.sum;
    rep.expected_degree.resize(static_cast<std::size_t>(n));
    rep.degree_variance.resize(static_cast<std::size_t>(n));
    rep.covariance = Eigen::MatrixXd::Zero(n, n);
    for (int a = 0; a < n; ++a) {
        double ea = s1[static_cast<std::size_t>(a)].sum / total.sum;
        rep.expected_degree[static_cast<std::size_t>(a)] = ea;
        for (int b = a; b < n; ++b) {
            double eb = s1[static_cast<std::size_t>(b)].sum / total.sum;
            double cov = cross[static_cast<std::size_t>(a * n + b)].sum / total.sum - ea * eb;
            rep.covariance(a, b) = rep.covariance(b, a) = cov;
        }
        rep.degree_variance[static_cast<std::size_t>(a)] = rep.covariance(a, a);
    }
    if (rep.integer_omega) {
        rep.degree_distribution.resize(static_cast<std::size_t>(n));
        for (int a = 0; a < n; ++a)
            for (const auto& [k, wk] : dist[static_cast<std::size_t>(a)])
                rep.degree_distribution[static_cast<std::size_t>(a)][k] = wk.sum / total.sum;
    }
    rep.edge_probability.resize(static_cast<std::size_t>(m));
    for (int id = 0; id < m; ++id)
        rep.edge_probability[static_cast<std::size_t>(id)] =
            edge_w[static_cast<std::size_t>(id)].sum / total.sum;
    return rep;
}

}  // namespace spantree
