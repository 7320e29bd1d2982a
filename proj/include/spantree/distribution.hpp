#pragma once

#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <boost/multiprecision/cpp_int.hpp>

#include "spantree/errors.hpp"
#include "spantree/graph.hpp"
#include "spantree/laplacian.hpp"
#include "spantree/moments.hpp"

namespace spantree {

/// Coefficients of the node-degree polynomial: k -> total probability
/// weight of the spanning trees where v has weighted degree k. Only
/// defined when omega is nonnegative-integer-valued on the edges incident
/// to v. The alternating sign convention lives in the evaluation helpers,
/// not in the stored coefficients.
struct DegreePolynomial {
    NodeId node = 0;
    std::map<long long, double> coeff;

    double total() const {
        double s = 0.0;
        for (const auto& [k, c] : coeff) s += c;
        return s;
    }
};

/// Exact degree distribution of one node: k -> Pr(deg_v = k).
struct DegreeDistribution {
    NodeId node = 0;
    std::map<long long, double> probability;
};

using JointDistribution = std::map<std::pair<long long, long long>, double>;

/// Coefficient recovery strategy. ExactRational converts every weight to
/// an arbitrary-precision rational (doubles convert exactly), evaluates
/// the determinants at integer scale factors and solves the interpolation
/// system exactly. Floating uses the double-precision determinant path
/// with a Chebyshev-node fallback when the Vandermonde system is too ill
/// conditioned.
enum class InterpMode { ExactRational, Floating };

namespace detail {

using Rational = boost::multiprecision::cpp_rational;

/// Runs fn(0..n-1); the iterations must be independent. Any exception is
/// rethrown on the calling thread after the pool joins.
template <typename Fn>
void parallel_for(int n, int threads, Fn&& fn) {
    if (threads <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    const int workers = std::min(threads, n);
    for (int t = 0; t < workers; ++t)
        pool.emplace_back([&] {
            for (int i; (i = next.fetch_add(1)) < n;) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    for (std::thread& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

inline Rational rational_pow(const Rational& base, long long e) {
    Rational out = 1;
    Rational b = base;
    long long n = e;
    while (n > 0) {
        if (n & 1) out *= b;
        b *= b;
        n >>= 1;
    }
    return out;
}

/// Exact determinant: clear each row's denominators (weights come from
/// IEEE doubles, so these are modest), then run Bareiss fraction-free
/// elimination over big integers. Intermediate entries stay near
/// n * input_bits instead of blowing up the way plain rational Gaussian
/// elimination does.
inline Rational rational_det(const std::vector<std::vector<Rational>>& a) {
    using Int = boost::multiprecision::cpp_int;
    const int n = static_cast<int>(a.size());
    if (n == 0) return 1;
    std::vector<std::vector<Int>> m(static_cast<std::size_t>(n),
                                    std::vector<Int>(static_cast<std::size_t>(n)));
    Rational row_scale_product = 1;
    for (int i = 0; i < n; ++i) {
        Int factor = 1;
        for (int j = 0; j < n; ++j)
            factor = boost::multiprecision::lcm(
                factor, boost::multiprecision::denominator(a[static_cast<std::size_t>(i)]
                                                            [static_cast<std::size_t>(j)]));
        for (int j = 0; j < n; ++j) {
            const Rational& q = a[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                boost::multiprecision::numerator(q) *
                (factor / boost::multiprecision::denominator(q));
        }
        row_scale_product *= Rational(factor);
    }
    int sign = 1;
    Int prev = 1;
    for (int k = 0; k < n - 1; ++k) {
        int pivot = -1;
        for (int row = k; row < n; ++row)
            if (m[static_cast<std::size_t>(row)][static_cast<std::size_t>(k)] != 0) {
                pivot = row;
                break;
            }
        if (pivot < 0) return 0;
        if (pivot != k) {
            std::swap(m[static_cast<std::size_t>(pivot)], m[static_cast<std::size_t>(k)]);
            sign = -sign;
        }
        for (int i = k + 1; i < n; ++i) {
            for (int j = k + 1; j < n; ++j) {
                Int t = m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] *
                            m[static_cast<std::size_t>(k)][static_cast<std::size_t>(k)] -
                        m[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] *
                            m[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
                m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = t / prev;
            }
            m[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] = 0;
        }
        prev = m[static_cast<std::size_t>(k)][static_cast<std::size_t>(k)];
    }
    const Rational det_scaled(sign * m[static_cast<std::size_t>(n - 1)]
                                      [static_cast<std::size_t>(n - 1)]);
    return det_scaled / row_scale_product;
}

/// det of the reduced Laplacian with per-edge rational weights.
inline Rational rational_reduced_det(const Graph& g, NodeId r,
                                     const std::vector<Rational>& edge_weight) {
    const int n = g.node_count();
    std::vector<int> pos(static_cast<std::size_t>(n), -1);
    for (NodeId v = 0, row = 0; v < n; ++v)
        if (v != r) pos[static_cast<std::size_t>(v)] = row++;
    std::vector<std::vector<Rational>> a(static_cast<std::size_t>(n - 1),
                                         std::vector<Rational>(static_cast<std::size_t>(n - 1), 0));
    const auto add = [&](int row, int col, const Rational& val) {
        if (row == r || col == r) return;
        a[static_cast<std::size_t>(pos[static_cast<std::size_t>(row)])]
         [static_cast<std::size_t>(pos[static_cast<std::size_t>(col)])] += val;
    };
    for (int id = 0; id < g.edge_count(); ++id) {
        const Edge& e = g.edge(id);
        const Rational& w = edge_weight[static_cast<std::size_t>(id)];
        if (g.directed()) {
            add(e.u, e.u, w);
            add(e.v, e.u, -w);
        } else {
            add(e.u, e.u, w);
            add(e.v, e.v, w);
            add(e.u, e.v, -w);
            add(e.v, e.u, -w);
        }
    }
    return rational_det(a);
}

/// Exact Vandermonde solve: coefficients of the polynomial of degree
/// xs.size()-1 through (xs[j], q[j]).
inline std::vector<Rational> rational_vandermonde_solve(const std::vector<Rational>& xs,
                                                        std::vector<Rational> q) {
    const int m = static_cast<int>(xs.size());
    std::vector<std::vector<Rational>> a(static_cast<std::size_t>(m),
                                         std::vector<Rational>(static_cast<std::size_t>(m)));
    for (int j = 0; j < m; ++j) {
        Rational p = 1;
        for (int k = 0; k < m; ++k) {
            a[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] = p;
            p *= xs[static_cast<std::size_t>(j)];
        }
    }
    // Gaussian elimination with the rhs carried along.
    for (int col = 0; col < m; ++col) {
        int pivot = -1;
        for (int row = col; row < m; ++row)
            if (a[static_cast<std::size_t>(row)][static_cast<std::size_t>(col)] != 0) {
                pivot = row;
                break;
            }
        if (pivot < 0) throw NumericalFailureError("singular interpolation system");
        if (pivot != col) {
            std::swap(a[static_cast<std::size_t>(pivot)], a[static_cast<std::size_t>(col)]);
            std::swap(q[static_cast<std::size_t>(pivot)], q[static_cast<std::size_t>(col)]);
        }
        const Rational p = a[static_cast<std::size_t>(col)][static_cast<std::size_t>(col)];
        for (int row = col + 1; row < m; ++row) {
            const Rational f =
                a[static_cast<std::size_t>(row)][static_cast<std::size_t>(col)] / p;
            if (f == 0) continue;
            for (int j = col; j < m; ++j)
                a[static_cast<std::size_t>(row)][static_cast<std::size_t>(j)] -=
                    f * a[static_cast<std::size_t>(col)][static_cast<std::size_t>(j)];
            q[static_cast<std::size_t>(row)] -= f * q[static_cast<std::size_t>(col)];
        }
    }
    std::vector<Rational> c(static_cast<std::size_t>(m));
    for (int row = m - 1; row >= 0; --row) {
        Rational s = q[static_cast<std::size_t>(row)];
        for (int j = row + 1; j < m; ++j)
            s -= a[static_cast<std::size_t>(row)][static_cast<std::size_t>(j)] *
                 c[static_cast<std::size_t>(j)];
        c[static_cast<std::size_t>(row)] =
            s / a[static_cast<std::size_t>(row)][static_cast<std::size_t>(row)];
    }
    return c;
}

/// Validates omega on the edges incident to v and returns the rounded
/// integer values; `max_degree` gets the sum (the polynomial degree bound).
inline std::vector<long long> integer_omegas(const Graph& g, NodeId v, long long& max_degree) {
    std::vector<long long> out;
    max_degree = 0;
    for (int id : g.incident_edges(v)) {
        const double om = g.edge(id).omega;
        const long long k = std::llround(om);
        if (std::abs(om - static_cast<double>(k)) > 1e-9 || k < 0)
            throw NonIntegerDegreeWeightsError(
                "degree weights incident to node " + std::to_string(v) +
                " must be nonnegative integers for distribution computations");
        out.push_back(k);
        max_degree += k;
    }
    return out;
}

/// Per-edge rational weights of (G x_v alpha^omega) [x_u beta^omega].
inline std::vector<Rational> scaled_rational_weights(const Graph& g, NodeId v, long long alpha,
                                                     std::optional<NodeId> u = {},
                                                     long long beta = 1) {
    std::vector<Rational> w(static_cast<std::size_t>(g.edge_count()));
    for (int id = 0; id < g.edge_count(); ++id) {
        const Edge& e = g.edge(id);
        Rational x(e.w);
        const long long om = std::llround(e.omega);
        if (e.u == v || e.v == v) x *= rational_pow(Rational(alpha), om);
        if (u && (e.u == *u || e.v == *u)) x *= rational_pow(Rational(beta), om);
        w[static_cast<std::size_t>(id)] = x;
    }
    return w;
}

/// Floating-path interpolation nodes: integers 1..m, replaced by a
/// Chebyshev layout on [0.5, 2] when the Vandermonde condition estimate
/// crosses 1e12.
inline std::vector<double> interpolation_nodes(int m, bool& chebyshev) {
    std::vector<double> xs(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j) xs[static_cast<std::size_t>(j)] = static_cast<double>(j + 1);
    Eigen::MatrixXd vand(m, m);
    for (int j = 0; j < m; ++j) {
        double p = 1.0;
        for (int k = 0; k < m; ++k) {
            vand(j, k) = p;
            p *= xs[static_cast<std::size_t>(j)];
        }
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(vand);
    const double smin = svd.singularValues()(m - 1);
    const double cond = smin > 0.0 ? svd.singularValues()(0) / smin
                                   : std::numeric_limits<double>::infinity();
    chebyshev = cond > 1e12;
    if (chebyshev)
        for (int j = 0; j < m; ++j)
            xs[static_cast<std::size_t>(j)] =
                1.25 + 0.75 * std::cos((2.0 * j + 1.0) * std::numbers::pi / (2.0 * m));
    return xs;
}

/// Solves the floating Vandermonde system and reports the relative
/// residual of the computed coefficients.
inline Eigen::VectorXd float_vandermonde_solve(const std::vector<double>& xs,
                                               const Eigen::VectorXd& q, double& residual) {
    const int m = static_cast<int>(xs.size());
    Eigen::MatrixXd vand(m, m);
    for (int j = 0; j < m; ++j) {
        double p = 1.0;
        for (int k = 0; k < m; ++k) {
            vand(j, k) = p;
            p *= xs[static_cast<std::size_t>(j)];
        }
    }
    Eigen::VectorXd c = vand.fullPivLu().solve(q);
    const double qn = q.norm();
    residual = qn > 0.0 ? (vand * c - q).norm() / qn : 0.0;
    return c;
}

inline void check_float_coefficients(const Eigen::VectorXd& c, double residual) {
    if (residual > 1e-8)
        throw IllConditionedInterpolationError(
            "interpolation residual " + std::to_string(residual) + " exceeds 1e-8");
    double scale = 0.0;
    for (int k = 0; k < c.size(); ++k) scale += std::abs(c(k));
    for (int k = 0; k < c.size(); ++k)
        if (c(k) < -1e-9 * scale)
            throw IllConditionedInterpolationError(
                "negative polynomial coefficient " + std::to_string(c(k)) +
                " (residual " + std::to_string(residual) + ")");
}

}  // namespace detail

/// P_w(-alpha) for alpha > 0: the total spanning-tree weight of the graph
/// scaled at v by alpha^omega, computed as det of its reduced Laplacian.
/// Valid for arbitrary real omega.
inline double evaluate_tree_polynomial(const Graph& g, NodeId v, double alpha,
                                       std::optional<NodeId> r = {},
                                       const SolveOptions& opts = {}) {
    g.check_node(v);
    if (!(alpha > 0.0)) throw PreconditionViolatedError("alpha must be positive");
    const NodeId root = detail::resolve_root(g, r);
    detail::require_moment_preconditions(g, root);
    const Graph scaled = scale_at_node(g, ScaleSpec::power_alpha(v, alpha));
    return tree_total_weight(reduce(build_laplacian(scaled), root, opts));
}

/// Recovers the degree-polynomial coefficients of v by evaluating the
/// scaled-graph determinant at d+1 scale factors (d = sum of the integer
/// degree weights incident to v) and solving the interpolation system.
inline DegreePolynomial interpolate_degree_polynomial(const Graph& g, NodeId v,
                                                      std::optional<NodeId> r = {},
                                                      InterpMode mode = InterpMode::ExactRational,
                                                      const SolveOptions& opts = {},
                                                      int threads = 1) {
    g.check_node(v);
    const NodeId root = detail::resolve_root(g, r);
    detail::require_moment_preconditions(g, root);
    long long d = 0;
    detail::integer_omegas(g, v, d);
    const int m = static_cast<int>(d) + 1;

    DegreePolynomial poly;
    poly.node = v;

    if (mode == InterpMode::ExactRational) {
        std::vector<detail::Rational> xs(static_cast<std::size_t>(m));
        std::vector<detail::Rational> q(static_cast<std::size_t>(m));
        for (int j = 0; j < m; ++j) xs[static_cast<std::size_t>(j)] = j + 1;
        detail::parallel_for(m, threads, [&](int j) {
            q[static_cast<std::size_t>(j)] = detail::rational_reduced_det(
                g, root, detail::scaled_rational_weights(g, v, j + 1));
        });
        const std::vector<detail::Rational> c = detail::rational_vandermonde_solve(xs, q);
        for (int k = 0; k < m; ++k) {
            if (c[static_cast<std::size_t>(k)] == 0) continue;
            if (c[static_cast<std::size_t>(k)] < 0)
                throw NumericalFailureError("negative exact coefficient; inputs inconsistent");
            poly.coeff[k] = static_cast<double>(c[static_cast<std::size_t>(k)]);
        }
        return poly;
    }

    bool chebyshev = false;
    const std::vector<double> xs = detail::interpolation_nodes(m, chebyshev);
    Eigen::VectorXd q(m);
    detail::parallel_for(m, threads, [&](int j) {
        q(j) = evaluate_tree_polynomial(g, v, xs[static_cast<std::size_t>(j)], root, opts);
    });
    double residual = 0.0;
    const Eigen::VectorXd c = detail::float_vandermonde_solve(xs, q, residual);
    detail::check_float_coefficients(c, residual);
    double scale = 0.0;
    for (int k = 0; k < m; ++k) scale += std::abs(c(k));
    for (int k = 0; k < m; ++k)
        if (std::abs(c(k)) >= 1e-9 * scale) poly.coeff[k] = std::max(c(k), 0.0);
    return poly;
}

/// Full distribution of v's weighted degree over random spanning trees:
/// normalized polynomial coefficients.
inline DegreeDistribution degree_distribution(const Graph& g, NodeId v,
                                              std::optional<NodeId> r = {},
                                              InterpMode mode = InterpMode::ExactRational,
                                              const SolveOptions& opts = {}, int threads = 1) {
    const DegreePolynomial poly = interpolate_degree_polynomial(g, v, r, mode, opts, threads);
    const double total = poly.total();
    if (!(total > 0.0)) throw NumericalFailureError("tree weight total is not positive");
    DegreeDistribution dist;
    dist.node = v;
    for (const auto& [k, c] : poly.coeff) dist.probability[k] = c / total;
    return dist;
}

/// (expectation, variance) from the derivatives of the degree polynomial
/// at -1, taken analytically from the interpolated coefficients. This is
/// the cross-validation path for the trace formulas.
inline std::pair<double, double> moments_from_polynomial(const Graph& g, NodeId v,
                                                         std::optional<NodeId> r = {},
                                                         InterpMode mode = InterpMode::ExactRational,
                                                         const SolveOptions& opts = {},
                                                         int threads = 1) {
    const DegreePolynomial poly = interpolate_degree_polynomial(g, v, r, mode, opts, threads);
    // P(x) = sum_k (-1)^k c_k x^k evaluated with x = -1:
    //   P(-1) = sum c_k, P'(-1) = -sum k c_k, P''(-1) = sum k(k-1) c_k.
    double p0 = 0.0, p1 = 0.0, p2 = 0.0;
    for (const auto& [k, c] : poly.coeff) {
        const double kd = static_cast<double>(k);
        p0 += c;
        p1 += -kd * c;
        p2 += kd * (kd - 1.0) * c;
    }
    if (!(p0 > 0.0)) throw NumericalFailureError("tree weight total is not positive");
    const double expectation = -p1 / p0;
    const double variance = p2 / p0 - (p1 / p0) * (p1 / p0) - p1 / p0;
    return {expectation, std::max(variance, 0.0)};
}

/// Joint distribution of (deg_v, deg_u) via the bivariate polynomial:
/// determinants of the doubly scaled graph on a (d_v+1) x (d_u+1) grid,
/// recovered by nested univariate interpolation.
inline JointDistribution joint_degree_distribution(const Graph& g, NodeId v, NodeId u,
                                                   std::optional<NodeId> r = {},
                                                   InterpMode mode = InterpMode::ExactRational,
                                                   const SolveOptions& opts = {},
                                                   int threads = 1) {
    g.check_node(v);
    g.check_node(u);
    if (u == v) throw SameNodeError("joint distribution requires two distinct nodes");
    const NodeId root = detail::resolve_root(g, r);
    detail::require_moment_preconditions(g, root);
    long long dv = 0, du = 0;
    detail::integer_omegas(g, v, dv);
    detail::integer_omegas(g, u, du);
    const int mv = static_cast<int>(dv) + 1;
    const int mu = static_cast<int>(du) + 1;

    JointDistribution out;

    if (mode == InterpMode::ExactRational) {
        using detail::Rational;
        std::vector<Rational> xa(static_cast<std::size_t>(mv)), xb(static_cast<std::size_t>(mu));
        for (int i = 0; i < mv; ++i) xa[static_cast<std::size_t>(i)] = i + 1;
        for (int j = 0; j < mu; ++j) xb[static_cast<std::size_t>(j)] = j + 1;
        // dets[j][i]: value at (alpha_i, beta_j)
        std::vector<std::vector<Rational>> coeff_a(static_cast<std::size_t>(mu));
        detail::parallel_for(mu, threads, [&](int j) {
            std::vector<Rational> q(static_cast<std::size_t>(mv));
            for (int i = 0; i < mv; ++i)
                q[static_cast<std::size_t>(i)] = detail::rational_reduced_det(
                    g, root, detail::scaled_rational_weights(g, v, i + 1, u, j + 1));
            coeff_a[static_cast<std::size_t>(j)] = detail::rational_vandermonde_solve(xa, q);
        });
        Rational total = 0;
        std::vector<std::vector<Rational>> c(static_cast<std::size_t>(mv),
                                             std::vector<Rational>(static_cast<std::size_t>(mu)));
        for (int k = 0; k < mv; ++k) {
            std::vector<Rational> q(static_cast<std::size_t>(mu));
            for (int j = 0; j < mu; ++j)
                q[static_cast<std::size_t>(j)] =
                    coeff_a[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
            const std::vector<Rational> ck = detail::rational_vandermonde_solve(xb, q);
            for (int l = 0; l < mu; ++l) {
                c[static_cast<std::size_t>(k)][static_cast<std::size_t>(l)] =
                    ck[static_cast<std::size_t>(l)];
                total += ck[static_cast<std::size_t>(l)];
            }
        }
        if (total <= 0) throw NumericalFailureError("tree weight total is not positive");
        for (int k = 0; k < mv; ++k)
            for (int l = 0; l < mu; ++l) {
                const Rational& ckl = c[static_cast<std::size_t>(k)][static_cast<std::size_t>(l)];
                if (ckl == 0) continue;
                if (ckl < 0)
                    throw NumericalFailureError("negative exact coefficient; inputs inconsistent");
                out[{k, l}] = static_cast<double>(ckl / total);
            }
        return out;
    }

    bool cheb_a = false, cheb_b = false;
    const std::vector<double> xa = detail::interpolation_nodes(mv, cheb_a);
    const std::vector<double> xb = detail::interpolation_nodes(mu, cheb_b);
    Eigen::MatrixXd coeff_a(mv, mu);  // column j: coefficients in alpha at beta_j
    detail::parallel_for(mu, threads, [&](int j) {
        Eigen::VectorXd q(mv);
        for (int i = 0; i < mv; ++i) {
            Graph scaled = scale_at_node(g, ScaleSpec::power_alpha(v, xa[static_cast<std::size_t>(i)]));
            scaled = scale_at_node(scaled, ScaleSpec::power_alpha(u, xb[static_cast<std::size_t>(j)]));
            q(i) = tree_total_weight(reduce(build_laplacian(scaled), root, opts));
        }
        double residual = 0.0;
        coeff_a.col(j) = detail::float_vandermonde_solve(xa, q, residual);
        if (residual > 1e-8)
            throw IllConditionedInterpolationError("interpolation residual " +
                                                   std::to_string(residual) + " exceeds 1e-8");
    });
    Eigen::MatrixXd c(mv, mu);
    for (int k = 0; k < mv; ++k) {
        double residual = 0.0;
        Eigen::VectorXd row = coeff_a.row(k).transpose();
        c.row(k) = detail::float_vandermonde_solve(xb, row, residual).transpose();
        if (residual > 1e-8)
            throw IllConditionedInterpolationError("interpolation residual " +
                                                   std::to_string(residual) + " exceeds 1e-8");
    }
    const double total = c.sum();
    if (!(total > 0.0)) throw NumericalFailureError("tree weight total is not positive");
    const double scale = c.cwiseAbs().sum();
    for (int k = 0; k < mv; ++k)
        for (int l = 0; l < mu; ++l) {
            if (c(k, l) < -1e-9 * scale)
                throw IllConditionedInterpolationError("negative joint coefficient " +
                                                       std::to_string(c(k, l)));
            if (std::abs(c(k, l)) >= 1e-9 * scale)
                out[{k, l}] = std::max(c(k, l), 0.0) / total;
        }
    return out;
}

}  // namespace spantree
