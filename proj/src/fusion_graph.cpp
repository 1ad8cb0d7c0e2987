#include "flat/fusion_graph.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "flat/error.hpp"

namespace flat {

namespace {

Index find_root(std::vector<Index>& parent, Index x) {
    while (parent[x] != x) {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    return x;
}

}  // namespace

double SpanningTree::total_weight() const {
    double total = 0.0;
    for (const auto& e : edges) total += e.weight;
    return total;
}

void SpanningTree::validate() const {
    if (n < 2) throw ValidationError("spanning tree needs at least 2 vertices");
    if (static_cast<Index>(edges.size()) != n - 1)
        throw ValidationError("spanning tree on " + std::to_string(n) + " vertices has " +
                              std::to_string(edges.size()) + " edges");
    std::vector<Index> parent(n);
    std::iota(parent.begin(), parent.end(), Index{0});
    for (const auto& e : edges) {
        if (e.u < 0 || e.v >= n || e.u >= e.v)
            throw ValidationError("edge (" + std::to_string(e.u) + "," + std::to_string(e.v) +
                                  ") is out of range or not ordered u < v");
        if (!std::isfinite(e.weight) || e.weight < 0)
            throw ValidationError("edge weight must be finite and nonnegative");
        const Index a = find_root(parent, e.u);
        const Index b = find_root(parent, e.v);
        if (a == b) throw ValidationError("edge set contains a cycle");
        parent[a] = b;
    }
    // n - 1 acyclic edges on n vertices always connect them.
}

SpanningTree prim_mst(const Eigen::MatrixXd& dist) {
    const Index n = dist.rows();
    if (n < 2 || dist.cols() != n) throw DimensionError("prim_mst needs a square matrix, n >= 2");
    if (!dist.allFinite()) throw NonFiniteError("distance matrix has non-finite entries");

    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> key(n, kInf);
    std::vector<Index> from(n, -1);
    std::vector<char> in_tree(n, 0);

    SpanningTree tree;
    tree.n = n;
    tree.edges.reserve(n - 1);

    Index current = 0;
    in_tree[0] = 1;
    for (Index step = 1; step < n; ++step) {
        for (Index v = 0; v < n; ++v) {
            if (!in_tree[v] && dist(current, v) < key[v]) {
                key[v] = dist(current, v);
                from[v] = current;
            }
        }
        Index next = -1;
        for (Index v = 0; v < n; ++v) {
            if (!in_tree[v] && (next < 0 || key[v] < key[next])) next = v;
        }
        in_tree[next] = 1;
        const Index a = std::min(next, from[next]);
        const Index b = std::max(next, from[next]);
        tree.edges.push_back({a, b, key[next]});
        current = next;
    }
    return tree;
}

Eigen::SparseMatrix<double> build_incidence(const SpanningTree& tree) {
    const Index m = static_cast<Index>(tree.edges.size());
    Eigen::SparseMatrix<double> h(m, tree.n);
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(2 * m);
    for (Index l = 0; l < m; ++l) {
        entries.emplace_back(l, tree.edges[l].u, 1.0);
        entries.emplace_back(l, tree.edges[l].v, -1.0);
    }
    h.setFromTriplets(entries.begin(), entries.end());
    return h;
}

Eigen::VectorXd adaptive_weights(const SpanningTree& tree, const Eigen::MatrixXd& coef_dist,
                                 double weight_gamma, double floor) {
    if (!(weight_gamma > 0) || !std::isfinite(weight_gamma))
        throw ConfigError("gamma", "adaptive weight exponent must be positive");
    if (!(floor > 0)) throw ConfigError("distance_floor", "distance floor must be positive");
    if (coef_dist.rows() != tree.n || coef_dist.cols() != tree.n)
        throw DimensionError("coefficient distance matrix does not match tree size");
    Eigen::VectorXd pi(static_cast<Index>(tree.edges.size()));
    for (Index l = 0; l < pi.size(); ++l) {
        const auto& e = tree.edges[l];
        const double d = std::max(coef_dist(e.u, e.v), floor);
        pi[l] = 1.0 / std::pow(d, weight_gamma);
    }
    return pi;
}

FusionGraph::FusionGraph(SpanningTree tree, Eigen::VectorXd pi, double ratio)
    : tree_(std::move(tree)), pi_(std::move(pi)), ratio_(ratio) {
    tree_.validate();
    const Index n = tree_.n;
    if (pi_.size() != n - 1) throw DimensionError("pi must have one entry per tree edge");
    if (!pi_.allFinite() || (pi_.array() <= 0).any())
        throw ConfigError("pi", "H~ is singular: adaptive weights must be finite and positive");
    if (!(ratio_ > 0) || !std::isfinite(ratio_))
        throw ConfigError("ratio", "H~ is singular: lambda2/lambda1 must be positive");

    incidence_ = build_incidence(tree_);

    std::vector<std::vector<Index>> adjacent(n);
    for (Index l = 0; l < n - 1; ++l) {
        adjacent[tree_.edges[l].u].push_back(l);
        adjacent[tree_.edges[l].v].push_back(l);
    }
    order_.reserve(n);
    parent_.assign(n, -1);
    parent_edge_.assign(n, -1);
    std::vector<char> seen(n, 0);
    order_.push_back(0);
    seen[0] = 1;
    for (std::size_t head = 0; head < order_.size(); ++head) {
        const Index x = order_[head];
        for (Index l : adjacent[x]) {
            const Index y = tree_.edges[l].u == x ? tree_.edges[l].v : tree_.edges[l].u;
            if (seen[y]) continue;
            seen[y] = 1;
            parent_[y] = x;
            parent_edge_[y] = l;
            order_.push_back(y);
        }
    }
}

Eigen::VectorXd FusionGraph::multiply(const Eigen::Ref<const Eigen::VectorXd>& beta) const {
    const Index n = tree_.n;
    if (beta.size() != n) throw DimensionError("H~ multiply: length mismatch");
    Eigen::VectorXd theta(n);
    for (Index l = 0; l < n - 1; ++l) {
        const auto& e = tree_.edges[l];
        theta[l] = pi_[l] * (beta[e.u] - beta[e.v]);
    }
    theta[n - 1] = ratio_ * beta.sum();
    return theta;
}

Eigen::VectorXd FusionGraph::solve(const Eigen::Ref<const Eigen::VectorXd>& theta) const {
    const Index n = tree_.n;
    if (theta.size() != n) throw DimensionError("H~ solve: length mismatch");
    Eigen::VectorXd beta(n);
    beta[0] = 0.0;
    for (Index k = 1; k < n; ++k) {
        const Index child = order_[k];
        const Index l = parent_edge_[child];
        const double diff = theta[l] / pi_[l];  // beta_u - beta_v on edge l
        beta[child] = tree_.edges[l].u == child ? beta[parent_[child]] + diff
                                                : beta[parent_[child]] - diff;
    }
    const double shift = (theta[n - 1] / ratio_ - beta.sum()) / static_cast<double>(n);
    beta.array() += shift;
    return beta;
}

Eigen::MatrixXd FusionGraph::h_tilde_dense() const {
    const Index n = tree_.n;
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
    for (Index l = 0; l < n - 1; ++l) {
        h(l, tree_.edges[l].u) = pi_[l];
        h(l, tree_.edges[l].v) = -pi_[l];
    }
    h.row(n - 1).setConstant(ratio_);
    return h;
}

Eigen::MatrixXd FusionGraph::inverse_dense() const {
    const Index n = tree_.n;
    Eigen::MatrixXd inv(n, n);
    Eigen::VectorXd unit = Eigen::VectorXd::Zero(n);
    for (Index j = 0; j < n; ++j) {
        unit[j] = 1.0;
        inv.col(j) = solve(unit);
        unit[j] = 0.0;
    }
    return inv;
}

void write_tree_csv(const SpanningTree& tree, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.precision(17);
    out << "i,j,weight\n";
    for (const auto& e : tree.edges) out << e.u << ',' << e.v << ',' << e.weight << '\n';
}

}  // namespace flat
