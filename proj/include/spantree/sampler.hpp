#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "spantree/errors.hpp"
#include "spantree/graph.hpp"
#include "spantree/oracle.hpp"

namespace spantree {

/// SplitMix64: the documented, seedable, counter-based generator behind
/// all sampling. The state is a Weyl counter; every output is a finalizer
/// hash of it, so substreams are cheap to derive and sequences are
/// reproducible from (seed) alone.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1) with 53 random bits.
    double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t state_;
};

inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Substream seed for sample/worker `index`: mix64(seed ^ mix64(index)).
/// Samples drawn from distinct substreams are independent and the merged
/// results do not depend on execution order.
inline std::uint64_t derive_substream_seed(std::uint64_t seed, std::uint64_t index) {
    return mix64(seed ^ mix64(index));
}

struct SamplerConfig {
    long long count = 1;
    std::uint64_t seed = 0;
    std::optional<NodeId> root;  // mandatory for directed graphs
    int threads = 1;
};

struct EmpiricalMoments {
    std::vector<NodeId> nodes;
    std::vector<double> mean;
    std::vector<double> variance;   // unbiased sample variance
    std::vector<double> std_error;  // sqrt(variance / samples)
    long long samples = 0;
};

namespace detail {

/// Cumulative-weight transition table for the random walk. Undirected
/// walks may traverse an edge in either direction; directed walks follow
/// the edge orientation (toward absorption at the root).
struct WalkTable {
    std::vector<std::vector<int>> edge_ids;
    std::vector<std::vector<NodeId>> to;
    std::vector<std::vector<double>> cum;

    WalkTable(const Graph& g) {
        const int n = g.node_count();
        edge_ids.resize(static_cast<std::size_t>(n));
        to.resize(static_cast<std::size_t>(n));
        cum.resize(static_cast<std::size_t>(n));
        for (NodeId v = 0; v < n; ++v) {
            const std::vector<int>& ids = g.directed() ? g.out_edges(v) : g.incident_edges(v);
            double running = 0.0;
            for (int id : ids) {
                const Edge& e = g.edge(id);
                if (!(e.w > 0.0))
                    throw PreconditionViolatedError(
                        "sampling requires strictly positive probability weights");
                running += e.w;
                edge_ids[static_cast<std::size_t>(v)].push_back(id);
                to[static_cast<std::size_t>(v)].push_back(e.u == v ? e.v : e.u);
                cum[static_cast<std::size_t>(v)].push_back(running);
            }
        }
    }

    std::pair<int, NodeId> step(NodeId v, SplitMix64& rng) const {
        const std::vector<double>& c = cum[static_cast<std::size_t>(v)];
        const double x = rng.next_double() * c.back();
        const std::size_t i = static_cast<std::size_t>(
            std::upper_bound(c.begin(), c.end(), x) - c.begin());
        const std::size_t j = std::min(i, c.size() - 1);
        return {edge_ids[static_cast<std::size_t>(v)][j], to[static_cast<std::size_t>(v)][j]};
    }
};

inline TreeSample wilson_sample_impl(const Graph& g, const WalkTable& table, NodeId root,
                                     std::uint64_t seed) {
    const int n = g.node_count();
    TreeSample out;
    if (n == 1) return out;
    SplitMix64 rng(seed);
    std::vector<char> in_tree(static_cast<std::size_t>(n), 0);
    std::vector<int> next_edge(static_cast<std::size_t>(n), -1);
    std::vector<NodeId> next_node(static_cast<std::size_t>(n), -1);
    in_tree[static_cast<std::size_t>(root)] = 1;
    for (NodeId start = 0; start < n; ++start) {
        NodeId u = start;
        // Random walk until absorption; revisits overwrite the exit edge,
        // which erases loops.
        while (!in_tree[static_cast<std::size_t>(u)]) {
            auto [eid, v] = table.step(u, rng);
            next_edge[static_cast<std::size_t>(u)] = eid;
            next_node[static_cast<std::size_t>(u)] = v;
            u = v;
        }
        u = start;
        while (!in_tree[static_cast<std::size_t>(u)]) {
            in_tree[static_cast<std::size_t>(u)] = 1;
            out.edge_ids.push_back(next_edge[static_cast<std::size_t>(u)]);
            u = next_node[static_cast<std::size_t>(u)];
        }
    }
    std::sort(out.edge_ids.begin(), out.edge_ids.end());
    out.weight = 1.0;
    for (int id : out.edge_ids) out.weight *= g.edge(id).w;
    return out;
}

}  // namespace detail

/// One exact draw from the Gibbs distribution over spanning trees
/// (undirected) or in-trees rooted at cfg.root (directed), via Wilson's
/// loop-erased random walk. The undirected root defaults to node 0 and
/// does not affect the sampled law.
inline TreeSample wilson_sample(const Graph& g, const SamplerConfig& cfg) {
    NodeId root;
    if (g.directed()) {
        if (!cfg.root) throw RootRequiredError("directed sampling requires a root");
        root = *cfg.root;
        g.check_node(root);
        if (!all_nodes_reach(g, root))
            throw DisconnectedError("not every node reaches root " + std::to_string(root));
    } else {
        root = cfg.root.value_or(0);
        g.check_node(root);
        if (!is_connected(g)) throw DisconnectedError("graph is not connected");
    }
    detail::WalkTable table(g);
    return detail::wilson_sample_impl(g, table, root, cfg.seed);
}

/// Empirical degree moments over cfg.count independent Wilson draws.
/// Sample i uses substream derive_substream_seed(cfg.seed, i), so results
/// are deterministic for a fixed config. Batches run on cfg.threads
/// workers and are merged in worker order.
inline EmpiricalMoments monte_carlo_moments(const Graph& g, const std::vector<NodeId>& nodes,
                                            const SamplerConfig& cfg) {
    if (cfg.count < 1) throw PreconditionViolatedError("sample count must be >= 1");
    for (NodeId v : nodes) g.check_node(v);
    NodeId root;
    if (g.directed()) {
        if (!cfg.root) throw RootRequiredError("directed sampling requires a root");
        root = *cfg.root;
        g.check_node(root);
        if (!all_nodes_reach(g, root))
            throw DisconnectedError("not every node reaches root " + std::to_string(root));
    } else {
        root = cfg.root.value_or(0);
        g.check_node(root);
        if (!is_connected(g)) throw DisconnectedError("graph is not connected");
    }
    const detail::WalkTable table(g);
    const std::size_t k = nodes.size();
    const int workers = std::max(1, cfg.threads);

    std::vector<std::vector<detail::KahanSum>> sum(static_cast<std::size_t>(workers),
                                                   std::vector<detail::KahanSum>(k));
    std::vector<std::vector<detail::KahanSum>> sumsq(static_cast<std::size_t>(workers),
                                                     std::vector<detail::KahanSum>(k));
    const auto run = [&](int worker, long long lo, long long hi) {
        std::vector<double> deg(static_cast<std::size_t>(g.node_count()));
        for (long long i = lo; i < hi; ++i) {
            const TreeSample t =
                detail::wilson_sample_impl(g, table, root, derive_substream_seed(cfg.seed,
                                                                                 static_cast<std::uint64_t>(i)));
            std::fill(deg.begin(), deg.end(), 0.0);
            for (int id : t.edge_ids) {
                const Edge& e = g.edge(id);
                deg[static_cast<std::size_t>(e.u)] += e.omega;
                deg[static_cast<std::size_t>(e.v)] += e.omega;
            }
            for (std::size_t j = 0; j < k; ++j) {
                const double d = deg[static_cast<std::size_t>(nodes[j])];
                sum[static_cast<std::size_t>(worker)][j].add(d);
                sumsq[static_cast<std::size_t>(worker)][j].add(d * d);
            }
        }
    };

    if (workers == 1) {
        run(0, 0, cfg.count);
    } else {
        std::vector<std::thread> pool;
        const long long chunk = (cfg.count + workers - 1) / workers;
        for (int t = 0; t < workers; ++t) {
            const long long lo = t * chunk;
            const long long hi = std::min<long long>(cfg.count, lo + chunk);
            if (lo >= hi) break;
            pool.emplace_back(run, t, lo, hi);
        }
        for (std::thread& th : pool) th.join();
    }

    EmpiricalMoments out;
    out.nodes = nodes;
    out.samples = cfg.count;
    out.mean.resize(k);
    out.variance.resize(k);
    out.std_error.resize(k);
    const double m = static_cast<double>(cfg.count);
    for (std::size_t j = 0; j < k; ++j) {
        double s1 = 0.0, s2 = 0.0;
        for (int t = 0; t < workers; ++t) {
            s1 += sum[static_cast<std::size_t>(t)][j].sum;
            s2 += sumsq[static_cast<std::size_t>(t)][j].sum;
        }
        const double mean = s1 / m;
        double var = 0.0;
        if (cfg.count > 1) var = std::max(0.0, (s2 - m * mean * mean) / (m - 1.0));
        out.mean[j] = mean;
        out.variance[j] = var;
        out.std_error[j] = std::sqrt(var / m);
    }
    return out;
}

}  // namespace spantree
