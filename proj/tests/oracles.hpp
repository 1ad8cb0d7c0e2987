#pragma once

// Slow, independent reference implementations used only by the tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "flat/fusion_graph.hpp"
#include "flat/solver.hpp"

namespace oracle {

using Eigen::Index;

struct UnionFind {
    std::vector<Index> parent;
    explicit UnionFind(Index n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    Index find(Index x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    bool unite(Index a, Index b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        parent[a] = b;
        return true;
    }
};

inline double kruskal_weight(const Eigen::MatrixXd& d) {
    const Index n = d.rows();
    std::vector<std::tuple<double, Index, Index>> edges;
    for (Index i = 0; i < n; ++i)
        for (Index j = i + 1; j < n; ++j) edges.emplace_back(d(i, j), i, j);
    std::sort(edges.begin(), edges.end());
    UnionFind uf(n);
    double total = 0.0;
    for (auto [w, i, j] : edges)
        if (uf.unite(i, j)) total += w;
    return total;
}

/// Minimum over every labelled tree on n vertices, enumerated by Pruefer code.
inline double exhaustive_mst_weight(const Eigen::MatrixXd& d) {
    const Index n = d.rows();
    if (n == 1) return 0.0;
    if (n == 2) return d(0, 1);
    std::vector<Index> code(n - 2, 0);
    double best = std::numeric_limits<double>::infinity();
    while (true) {
        std::vector<int> degree(n, 1);
        for (Index c : code) ++degree[c];
        double total = 0.0;
        std::vector<int> deg = degree;
        for (Index c : code) {
            Index leaf = 0;
            while (deg[leaf] != 1) ++leaf;
            total += d(leaf, c);
            --deg[leaf];
            --deg[c];
        }
        Index a = -1, b = -1;
        for (Index v = 0; v < n; ++v)
            if (deg[v] == 1) (a < 0 ? a : b) = v;
        total += d(a, b);
        best = std::min(best, total);

        Index pos = 0;
        while (pos < n - 2 && ++code[pos] == n) code[pos++] = 0;
        if (pos == n - 2) break;
    }
    return best;
}

/// H~ assembled densely from its definition.
inline Eigen::MatrixXd h_tilde(const flat::SpanningTree& tree, const Eigen::VectorXd& pi,
                               double ratio) {
    const Index n = tree.n;
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t l = 0; l < tree.edges.size(); ++l) {
        h(l, tree.edges[l].u) = pi[l];
        h(l, tree.edges[l].v) = -pi[l];
    }
    h.row(n - 1).setConstant(ratio);
    return h;
}

/// [diag(x_1) H~^{-1}, ..., diag(x_p) H~^{-1}] through a dense LU inverse.
inline Eigen::MatrixXd design(const Eigen::MatrixXd& covariates, const Eigen::MatrixXd& h) {
    const Index n = h.rows();
    const Eigen::MatrixXd inv = h.fullPivLu().inverse();
    Eigen::MatrixXd x(n, n * covariates.cols());
    for (Index k = 0; k < covariates.cols(); ++k)
        x.middleCols(k * n, n) = covariates.col(k).asDiagonal() * inv;
    return x;
}

inline double lasso_objective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                              const Eigen::VectorXd& theta, double lambda) {
    return 0.5 * (y - x * theta).squaredNorm() + lambda * theta.cwiseAbs().sum();
}

/// Accelerated proximal gradient with adaptive restart, run until the iterate
/// moves less than `tol`.
inline Eigen::VectorXd proximal_gradient(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                         double lambda, double tol = 1e-10,
                                         int max_iter = 2000000) {
    const Eigen::MatrixXd gram = x.transpose() * x;
    const Eigen::VectorXd xty = x.transpose() * y;
    const double step = 1.0 / std::max(gram.selfadjointView<Eigen::Lower>().eigenvalues().maxCoeff(), 1e-300);
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(x.cols()), z = theta, prev = theta;
    double t = 1.0;
    double last = std::numeric_limits<double>::infinity();
    for (int it = 0; it < max_iter; ++it) {
        Eigen::VectorXd u = z - step * (gram * z - xty);
        for (Index j = 0; j < u.size(); ++j) u[j] = flat::soft_threshold(u[j], step * lambda);
        const double moved = (u - prev).norm();
        const double obj = lasso_objective(x, y, u, lambda);
        const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        if (obj > last) {
            t = 1.0;
            z = u;
        } else {
            z = u + ((t - 1.0) / tn) * (u - prev);
            t = tn;
        }
        last = obj;
        prev = u;
        theta = u;
        if (moved < tol && it > 10) break;
    }
    return theta;
}

/// Pair counts: same/same, same in truth only, same in prediction only, apart in both.
struct Pairs {
    double ss = 0, sd = 0, ds = 0, dd = 0;
};

inline Pairs count_pairs(const std::vector<int>& a, const std::vector<int>& b) {
    Pairs p;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = i + 1; j < a.size(); ++j) {
            const bool sa = a[i] == a[j], sb = b[i] == b[j];
            if (sa && sb) ++p.ss;
            else if (sa) ++p.sd;
            else if (sb) ++p.ds;
            else ++p.dd;
        }
    return p;
}

inline double rand_index(const std::vector<int>& a, const std::vector<int>& b) {
    const Pairs p = count_pairs(a, b);
    return (p.ss + p.dd) / (p.ss + p.sd + p.ds + p.dd);
}

/// Pair-count form of the adjusted Rand index.
inline double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
    const Pairs p = count_pairs(a, b);
    const double den = (p.dd + p.sd) * (p.sd + p.ss) + (p.dd + p.ds) * (p.ds + p.ss);
    if (den == 0.0) return (p.sd == 0 && p.ds == 0) ? 1.0 : 0.0;
    return 2.0 * (p.dd * p.ss - p.sd * p.ds) / den;
}

/// DBSCAN by closure: core points are linked when within eps, clusters are the
/// connected components of that graph (transitive closure), numbered by their
/// smallest core index; a border point joins the earliest-numbered cluster
/// with a core within eps; the rest is noise (-1). Labels then renumbered by
/// first occurrence.
inline std::vector<int> dbscan_closure(const Eigen::MatrixXd& pts, double eps, int min_pts) {
    const Index n = pts.rows();
    std::vector<std::vector<char>> near(n, std::vector<char>(n, 0));
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) near[i][j] = (pts.row(i) - pts.row(j)).norm() <= eps;
    std::vector<char> core(n, 0);
    for (Index i = 0; i < n; ++i)
        core[i] = std::count(near[i].begin(), near[i].end(), 1) >= min_pts;

    std::vector<std::vector<char>> reach(n, std::vector<char>(n, 0));
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) reach[i][j] = core[i] && core[j] && near[i][j];
    for (Index k = 0; k < n; ++k)
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j)
                if (reach[i][k] && reach[k][j]) reach[i][j] = 1;

    std::vector<int> component(n, -1);  // smallest core index in the component
    for (Index i = 0; i < n; ++i) {
        if (!core[i]) continue;
        for (Index j = 0; j <= i; ++j)
            if (core[j] && (j == i || reach[i][j])) {
                component[i] = static_cast<int>(j);
                break;
            }
    }
    std::vector<int> raw(n, -1);
    for (Index i = 0; i < n; ++i) {
        if (core[i]) {
            raw[i] = component[i];
            continue;
        }
        int best = -1;
        for (Index j = 0; j < n; ++j)
            if (core[j] && near[i][j] && (best < 0 || component[j] < best)) best = component[j];
        raw[i] = best;
    }
    std::vector<int> out(n, -1);
    std::vector<std::pair<int, int>> seen;
    for (Index i = 0; i < n; ++i) {
        if (raw[i] < 0) continue;
        auto it = std::find_if(seen.begin(), seen.end(), [&](auto& s) { return s.first == raw[i]; });
        if (it == seen.end()) {
            seen.emplace_back(raw[i], static_cast<int>(seen.size()) + 1);
            it = seen.end() - 1;
        }
        out[i] = it->second;
    }
    return out;
}

/// Mean silhouette straight from the definition; noise (-1) skipped,
/// members of singleton clusters score 0.
inline double silhouette(const Eigen::MatrixXd& pts, const std::vector<int>& labels) {
    const Index n = pts.rows();
    double total = 0.0;
    int count = 0;
    for (Index i = 0; i < n; ++i) {
        if (labels[i] < 0) continue;
        std::vector<int> ids;
        for (int l : labels)
            if (l >= 0 && std::find(ids.begin(), ids.end(), l) == ids.end()) ids.push_back(l);
        double a = 0.0, b = std::numeric_limits<double>::infinity();
        int own = 0;
        for (int c : ids) {
            double sum = 0.0;
            int m = 0;
            for (Index j = 0; j < n; ++j) {
                if (labels[j] != c || j == i) continue;
                sum += (pts.row(i) - pts.row(j)).norm();
                ++m;
            }
            if (c == labels[i]) {
                own = m;
                a = m ? sum / m : 0.0;
            } else {
                b = std::min(b, sum / m);
            }
        }
        total += own == 0 ? 0.0 : (b - a) / std::max(a, b);
        ++count;
    }
    return total / count;
}

/// Variance ratio (between / (k - 1)) / (within / (n - k)) over non-noise points.
inline double calinski_harabasz(const Eigen::MatrixXd& pts, const std::vector<int>& labels) {
    std::vector<int> ids;
    Index n = 0;
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(pts.cols());
    for (Index i = 0; i < pts.rows(); ++i) {
        if (labels[i] < 0) continue;
        if (std::find(ids.begin(), ids.end(), labels[i]) == ids.end()) ids.push_back(labels[i]);
        mean += pts.row(i);
        ++n;
    }
    mean /= static_cast<double>(n);
    double between = 0.0, within = 0.0;
    for (int c : ids) {
        Eigen::RowVectorXd centroid = Eigen::RowVectorXd::Zero(pts.cols());
        int m = 0;
        for (Index i = 0; i < pts.rows(); ++i)
            if (labels[i] == c) {
                centroid += pts.row(i);
                ++m;
            }
        centroid /= m;
        between += m * (centroid - mean).squaredNorm();
        for (Index i = 0; i < pts.rows(); ++i)
            if (labels[i] == c) within += (pts.row(i) - centroid).squaredNorm();
    }
    const double k = static_cast<double>(ids.size());
    return (between / (k - 1.0)) / (within / (static_cast<double>(n) - k));
}

/// Weighted least squares at one location, solved by QR.
inline Eigen::VectorXd weighted_ls(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                   const Eigen::VectorXd& w) {
    const Eigen::VectorXd s = w.cwiseSqrt();
    return (s.asDiagonal() * x).colPivHouseholderQr().solve(s.asDiagonal() * y);
}

}  // namespace oracle
