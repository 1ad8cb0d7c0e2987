#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "flat/spatial.hpp"

namespace flat {

/// Tree edge, always stored with u < v.
struct Edge {
    Index u = 0;
    Index v = 0;
    double weight = 0.0;
};

struct SpanningTree {
    Index n = 0;
    std::vector<Edge> edges;

    double total_weight() const;

    /// n - 1 edges, u < v, finite nonnegative weights, and the edges connect
    /// every vertex. Throws ValidationError otherwise.
    void validate() const;
};

/// Dense O(n^2) Prim on the complete graph given by `dist`. Starts at vertex 0;
/// when several fringe vertices tie on distance the smallest index joins first,
/// and a vertex keeps the earliest tree vertex that reached its current key.
SpanningTree prim_mst(const Eigen::MatrixXd& dist);

/// Signed incidence matrix: row l holds +1 at edges[l].u and -1 at edges[l].v.
Eigen::SparseMatrix<double> build_incidence(const SpanningTree& tree);

inline constexpr double kDistanceFloor = 1e-6;

/// pi_l = 1 / max(D~[u][v], floor)^gamma for each tree edge.
Eigen::VectorXd adaptive_weights(const SpanningTree& tree, const Eigen::MatrixXd& coef_dist,
                                 double weight_gamma, double floor = kDistanceFloor);

/// The composite operator H~ = [diag(pi) H ; ratio * 1^T] over a spanning tree.
///
/// H~ is never formed densely for solves. Rooting the tree at vertex 0 gives
/// an elimination order in which every edge row fixes one child value from its
/// parent; the final row then fixes the common shift. That factorization is
/// computed once at construction and makes each solve O(n).
class FusionGraph {
public:
    FusionGraph(SpanningTree tree, Eigen::VectorXd pi, double ratio);

    const SpanningTree& tree() const { return tree_; }
    const Eigen::SparseMatrix<double>& incidence() const { return incidence_; }
    const Eigen::VectorXd& pi() const { return pi_; }
    double ratio() const { return ratio_; }
    Index n() const { return tree_.n; }

    /// theta = H~ beta.
    Eigen::VectorXd multiply(const Eigen::Ref<const Eigen::VectorXd>& beta) const;

    /// beta solving H~ beta = theta.
    Eigen::VectorXd solve(const Eigen::Ref<const Eigen::VectorXd>& theta) const;

    /// Dense H~; intended for diagnostics and small problems.
    Eigen::MatrixXd h_tilde_dense() const;

    /// Dense H~^{-1}, one solve per unit vector.
    Eigen::MatrixXd inverse_dense() const;

private:
    SpanningTree tree_;
    Eigen::SparseMatrix<double> incidence_;
    Eigen::VectorXd pi_;
    double ratio_;
    // Breadth-first order from vertex 0; order_[0] == 0.
    std::vector<Index> order_;
    std::vector<Index> parent_;
    std::vector<Index> parent_edge_;
};

/// Throws ConfigError when pi is not elementwise positive or ratio <= 0, since
/// H~ is singular there.
inline FusionGraph build_h_tilde(SpanningTree tree, Eigen::VectorXd pi, double ratio) {
    return FusionGraph(std::move(tree), std::move(pi), ratio);
}

/// Convenience wrapper matching FusionGraph::solve.
inline Eigen::VectorXd apply_h_tilde_inverse(const FusionGraph& fg,
                                             const Eigen::Ref<const Eigen::VectorXd>& theta) {
    return fg.solve(theta);
}

/// Writes the tree as `i,j,weight` CSV.
void write_tree_csv(const SpanningTree& tree, const std::string& path);

}  // namespace flat
