#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include "spantree/errors.hpp"
#include "spantree/graph.hpp"

namespace spantree {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Graph Laplacian: L = D - A for undirected graphs, L = D - A^T for
/// directed ones, where A_uv = w(u,v) and D is the diagonal of weighted
/// (out-)degrees. Entries depend only on the probability weights.
class LaplacianMatrix {
public:
    LaplacianMatrix(SparseMatrix m, bool directed)
        : matrix_(std::move(m)), directed_(directed) {}

    int dim() const { return static_cast<int>(matrix_.rows()); }
    bool directed() const { return directed_; }
    const SparseMatrix& sparse() const { return matrix_; }
    Eigen::MatrixXd dense() const { return Eigen::MatrixXd(matrix_); }

private:
    SparseMatrix matrix_;
    bool directed_;
};

namespace detail {

inline void add_laplacian_entries(const Edge& e, bool directed,
                                  std::vector<Eigen::Triplet<double>>& trip) {
    if (directed) {
        // D_uu accumulates the out-degree; A^T contributes -w at (v,u).
        trip.emplace_back(e.u, e.u, e.w);
        trip.emplace_back(e.v, e.u, -e.w);
    } else {
        trip.emplace_back(e.u, e.u, e.w);
        trip.emplace_back(e.v, e.v, e.w);
        trip.emplace_back(e.u, e.v, -e.w);
        trip.emplace_back(e.v, e.u, -e.w);
    }
}

}  // namespace detail

inline LaplacianMatrix build_laplacian(const Graph& g) {
    const int n = g.node_count();
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(g.edges().size() * 4);
    for (const Edge& e : g.edges()) detail::add_laplacian_entries(e, g.directed(), trip);
    SparseMatrix m(n, n);
    m.setFromTriplets(trip.begin(), trip.end());
    m.makeCompressed();
#ifndef NDEBUG
    // L_G = L_{G_v} + L_{G_\v} for every v (checked at debug scale only).
    if (n <= 32) {
        const Eigen::MatrixXd full(m);
        for (NodeId v = 0; v < n; ++v) {
            std::vector<Eigen::Triplet<double>> t1, t2;
            for (const Edge& e : g.edges())
                detail::add_laplacian_entries(e, g.directed(), (e.u == v || e.v == v) ? t1 : t2);
            Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(n, n);
            for (const auto& t : t1) sum(t.row(), t.col()) += t.value();
            for (const auto& t : t2) sum(t.row(), t.col()) += t.value();
            assert((sum - full).cwiseAbs().maxCoeff() <=
                   1e-12 * (1.0 + full.cwiseAbs().maxCoeff()));
        }
    }
#endif
    return LaplacianMatrix(std::move(m), g.directed());
}

struct SolveOptions {
    double solve_rel_tol = 1e-9;    // residual bound ||Lx-b||_inf / ||b||_inf
    double condition_limit = 1e14;  // beyond this the system counts as singular
    int dense_threshold = 64;       // dense factorization below this dimension
    bool allow_singular = false;    // keep a singular system instead of throwing
};

/// Factorized reduced Laplacian L^[r] (row and column of r removed).
/// Exposes the (log-)determinant, solves with residual checking, selected
/// inverse entries and trace expressions. The node<->row permutation is
/// stored explicitly; all public entry points take node ids.
class ReducedLaplacianSystem {
public:
    ReducedLaplacianSystem(const LaplacianMatrix& lap, NodeId r, SolveOptions opts = {})
        : opts_(opts), removed_(r), n_full_(lap.dim()), symmetric_(!lap.directed()) {
        if (r < 0 || r >= n_full_)
            throw NodeOutOfRangeError("removed node " + std::to_string(r) + " out of range");
        const int n = n_full_ - 1;
        row_of_node_.assign(static_cast<std::size_t>(n_full_), -1);
        node_of_row_.resize(static_cast<std::size_t>(n));
        for (NodeId v = 0, row = 0; v < n_full_; ++v) {
            if (v == removed_) continue;
            row_of_node_[static_cast<std::size_t>(v)] = row;
            node_of_row_[static_cast<std::size_t>(row)] = v;
            ++row;
        }

        reduced_ = SparseMatrix(n, n);
        {
            std::vector<Eigen::Triplet<double>> trip;
            const SparseMatrix& m = lap.sparse();
            for (int k = 0; k < m.outerSize(); ++k)
                for (SparseMatrix::InnerIterator it(m, k); it; ++it) {
                    if (it.row() == removed_ || it.col() == removed_) continue;
                    trip.emplace_back(row_of_node_[static_cast<std::size_t>(it.row())],
                                      row_of_node_[static_cast<std::size_t>(it.col())],
                                      it.value());
                }
            reduced_.setFromTriplets(trip.begin(), trip.end());
            reduced_.makeCompressed();
        }
        matrix_scale_ = 0.0;
        for (int k = 0; k < reduced_.nonZeros(); ++k)
            matrix_scale_ = std::max(matrix_scale_, std::abs(reduced_.valuePtr()[k]));

        factorize();
        if (singular_ && !opts_.allow_singular)
            throw SingularMatrixError(
                "reduced Laplacian is singular (graph disconnected or root unreachable); "
                "condition estimate " +
                std::to_string(condition_estimate_));
    }

    int dim() const { return n_full_ - 1; }
    NodeId removed_node() const { return removed_; }
    bool symmetric() const { return symmetric_; }
    bool singular() const { return singular_; }
    double condition_estimate() const { return condition_estimate_; }
    double max_solve_residual() const { return max_residual_; }
    const SparseMatrix& reduced_matrix() const { return reduced_; }

    int row_of(NodeId v) const {
        if (v < 0 || v >= n_full_ || v == removed_)
            throw NodeOutOfRangeError("node " + std::to_string(v) +
                                      " has no row in the reduced system");
        return row_of_node_[static_cast<std::size_t>(v)];
    }
    NodeId node_of(int row) const { return node_of_row_[static_cast<std::size_t>(row)]; }

    /// log|det L^[r]| and its sign (sign 0 when singular).
    double log_abs_determinant() const { return log_abs_det_; }
    int determinant_sign() const { return det_sign_; }

    /// det L^[r]; 0 when singular, +-inf when the log form overflows.
    double determinant() const {
        if (det_sign_ == 0) return 0.0;
        return det_sign_ * std::exp(log_abs_det_);
    }

    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
        if (rhs.size() != dim())
            throw DimensionMismatchError("rhs dimension " + std::to_string(rhs.size()) +
                                         " != " + std::to_string(dim()));
        if (singular_)
            throw SingularMatrixError("solve on a singular reduced Laplacian");
        if (dim() == 0) return Eigen::VectorXd(0);
        Eigen::VectorXd x = std::visit([&](const auto& f) -> Eigen::VectorXd {
            return f->solve(rhs);
        }, fact_);
        const double bnorm = rhs.lpNorm<Eigen::Infinity>();
        if (bnorm > 0.0) {
            const double res = (reduced_ * x - rhs).lpNorm<Eigen::Infinity>() / bnorm;
            max_residual_ = std::max(max_residual_, res);
            if (res > opts_.solve_rel_tol)
                throw NumericalFailureError("solve residual " + std::to_string(res) +
                                            " exceeds tolerance");
        }
        return x;
    }

    /// (L^[r])^{-1} restricted to S x S, via |S| unit-vector solves. Entry
    /// (i,j) corresponds to node pair (S[i], S[j]).
    Eigen::MatrixXd selected_inverse(const std::vector<NodeId>& nodes) const {
        const int k = static_cast<int>(nodes.size());
        Eigen::MatrixXd out(k, k);
        Eigen::VectorXd e = Eigen::VectorXd::Zero(dim());
        for (int j = 0; j < k; ++j) {
            const int col = row_of(nodes[static_cast<std::size_t>(j)]);
            e(col) = 1.0;
            Eigen::VectorXd x = solve(e);
            e(col) = 0.0;
            for (int i = 0; i < k; ++i)
                out(i, j) = x(row_of(nodes[static_cast<std::size_t>(i)]));
        }
        return out;
    }

    /// Tr[M (L^[r])^{-1}] for a sparse M over the reduced index space,
    /// using one solve per row of M's support.
    double trace_product(const SparseMatrix& m) const {
        if (m.rows() != dim() || m.cols() != dim())
            throw DimensionMismatchError("trace_product dimension mismatch");
        std::vector<char> in_support(static_cast<std::size_t>(dim()), 0);
        for (int k = 0; k < m.outerSize(); ++k)
            for (SparseMatrix::InnerIterator it(m, k); it; ++it)
                if (it.value() != 0.0) in_support[static_cast<std::size_t>(it.row())] = 1;
        std::vector<Eigen::VectorXd> inv_col(static_cast<std::size_t>(dim()));
        Eigen::VectorXd e = Eigen::VectorXd::Zero(dim());
        for (int i = 0; i < dim(); ++i) {
            if (!in_support[static_cast<std::size_t>(i)]) continue;
            e(i) = 1.0;
            inv_col[static_cast<std::size_t>(i)] = solve(e);
            e(i) = 0.0;
        }
        double tr = 0.0;
        for (int k = 0; k < m.outerSize(); ++k)
            for (SparseMatrix::InnerIterator it(m, k); it; ++it)
                if (it.value() != 0.0)
                    tr += it.value() * inv_col[static_cast<std::size_t>(it.row())](it.col());
        return tr;
    }

private:
    using DenseSym = Eigen::LDLT<Eigen::MatrixXd>;
    using DenseLU = Eigen::FullPivLU<Eigen::MatrixXd>;
    using SparseSym = Eigen::SimplicialLDLT<SparseMatrix>;
    using SparseGen = Eigen::SparseLU<SparseMatrix>;

    void factorize() {
        const int n = dim();
        if (n == 0) {  // single-node graph: det of the empty matrix is 1
            log_abs_det_ = 0.0;
            det_sign_ = 1;
            condition_estimate_ = 1.0;
            return;
        }
        const bool dense = n < opts_.dense_threshold;
        if (dense && symmetric_) {
            auto f = std::make_shared<DenseSym>(Eigen::MatrixXd(reduced_));
            const Eigen::VectorXd d = f->vectorD();
            finish_from_diagonal(d);
            fact_ = std::move(f);
        } else if (dense) {
            auto f = std::make_shared<DenseLU>(Eigen::MatrixXd(reduced_));
            const Eigen::VectorXd u = f->matrixLU().diagonal();
            const int perm_sign = static_cast<int>(f->permutationP().determinant()) *
                                  static_cast<int>(f->permutationQ().determinant());
            finish_from_diagonal(u, perm_sign);
            fact_ = std::move(f);
        } else if (symmetric_) {
            auto f = std::make_shared<SparseSym>();
            f->compute(reduced_);
            if (f->info() != Eigen::Success) {
                mark_singular();
            } else {
                const Eigen::VectorXd d = f->vectorD();
                finish_from_diagonal(d);
            }
            fact_ = std::move(f);
        } else {
            auto f = std::make_shared<SparseGen>();
            f->compute(reduced_);
            if (f->info() != Eigen::Success) {
                mark_singular();
            } else {
                log_abs_det_ = f->logAbsDeterminant();
                det_sign_ = static_cast<int>(f->signDeterminant());
                condition_estimate_ = probe_condition(*f);
                if (det_sign_ == 0 || condition_estimate_ > opts_.condition_limit)
                    mark_singular();
            }
            fact_ = std::move(f);
        }
    }

    // Determinant, condition estimate and singularity from a factor
    // diagonal (D of LDLT or U of LU; symmetric permutations leave the
    // determinant unchanged, LU permutation signs come in via perm_sign).
    void finish_from_diagonal(const Eigen::VectorXd& d, int perm_sign = 1) {
        double log_abs = 0.0;
        int sign = perm_sign;
        double dmax = 0.0, dmin = std::numeric_limits<double>::infinity();
        for (int i = 0; i < d.size(); ++i) {
            const double a = std::abs(d(i));
            dmax = std::max(dmax, a);
            dmin = std::min(dmin, a);
            if (a == 0.0) {
                sign = 0;
            } else {
                log_abs += std::log(a);
                if (d(i) < 0.0) sign = -sign;
            }
        }
        condition_estimate_ = (dmin == 0.0) ? std::numeric_limits<double>::infinity()
                                            : dmax / dmin;
        log_abs_det_ = log_abs;
        det_sign_ = sign;
        const double pivot_floor = matrix_scale_ * 1e-300;
        if (sign == 0 || dmin <= pivot_floor || condition_estimate_ > opts_.condition_limit)
            mark_singular();
    }

    // SparseLU exposes no pivot diagonal; estimate ||L||_inf * ||L^-1||_inf
    // from a couple of probe solves.
    double probe_condition(const SparseGen& f) const {
        double norm_l = 0.0;
        Eigen::VectorXd rowsum = Eigen::VectorXd::Zero(dim());
        for (int k = 0; k < reduced_.outerSize(); ++k)
            for (SparseMatrix::InnerIterator it(reduced_, k); it; ++it)
                rowsum(it.row()) += std::abs(it.value());
        norm_l = rowsum.maxCoeff();
        double inv_norm = 0.0;
        Eigen::VectorXd b = Eigen::VectorXd::Ones(dim());
        for (int probe = 0; probe < 2; ++probe) {
            Eigen::VectorXd x = f.solve(b);
            inv_norm = std::max(inv_norm, x.lpNorm<Eigen::Infinity>());
            for (int i = 0; i < b.size(); ++i) b(i) = (i % 2 == 0) ? 1.0 : -1.0;
        }
        return norm_l * inv_norm;
    }

    void mark_singular() {
        singular_ = true;
        log_abs_det_ = -std::numeric_limits<double>::infinity();
        det_sign_ = 0;
        if (condition_estimate_ == 0.0)
            condition_estimate_ = std::numeric_limits<double>::infinity();
    }

    SolveOptions opts_;
    NodeId removed_;
    int n_full_;
    bool symmetric_;
    bool singular_ = false;
    double log_abs_det_ = 0.0;
    int det_sign_ = 1;
    double condition_estimate_ = 0.0;
    double matrix_scale_ = 0.0;
    mutable double max_residual_ = 0.0;
    SparseMatrix reduced_;
    std::vector<int> row_of_node_;
    std::vector<NodeId> node_of_row_;
    std::variant<std::shared_ptr<DenseSym>, std::shared_ptr<DenseLU>,
                 std::shared_ptr<SparseSym>, std::shared_ptr<SparseGen>>
        fact_;
};

inline ReducedLaplacianSystem reduce(const LaplacianMatrix& lap, NodeId r,
                                     const SolveOptions& opts = {}) {
    return ReducedLaplacianSystem(lap, r, opts);
}

/// Total probability weight of all spanning trees (undirected, Matrix Tree
/// Theorem) or of all in-trees rooted at the removed node (directed).
/// Returns 0 for a singular system; may overflow to +inf for very large
/// graphs, in which case use log_tree_total_weight.
inline double tree_total_weight(const ReducedLaplacianSystem& sys) {
    return sys.determinant();
}

/// (log|w(T)|, sign); sign 0 means no spanning tree exists.
inline std::pair<double, int> log_tree_total_weight(const ReducedLaplacianSystem& sys) {
    return {sys.log_abs_determinant(), sys.determinant_sign()};
}

/// Drops row/column `r` from a full-graph matrix using the system's
/// node->row permutation, yielding a matrix in the reduced index space.
inline SparseMatrix reduced_matrix(const LaplacianMatrix& m,
                                   const ReducedLaplacianSystem& sys) {
    if (m.dim() != sys.dim() + 1)
        throw DimensionMismatchError("matrix dimension does not match the reduced system");
    std::vector<Eigen::Triplet<double>> trip;
    const SparseMatrix& src = m.sparse();
    const NodeId r = sys.removed_node();
    for (int k = 0; k < src.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(src, k); it; ++it) {
            if (it.row() == r || it.col() == r || it.value() == 0.0) continue;
            trip.emplace_back(sys.row_of(static_cast<NodeId>(it.row())),
                              sys.row_of(static_cast<NodeId>(it.col())), it.value());
        }
    SparseMatrix out(sys.dim(), sys.dim());
    out.setFromTriplets(trip.begin(), trip.end());
    out.makeCompressed();
    return out;
}

}  // namespace spantree
