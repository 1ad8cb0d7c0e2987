#include "flat/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <sstream>
#include <unordered_map>

#include "flat/error.hpp"

namespace flat {

namespace {

double choose2(std::int64_t m) { return 0.5 * static_cast<double>(m) * static_cast<double>(m - 1); }

// Compact 0..k-1 ids in first-occurrence order.
std::vector<int> compact(std::span<const int> labels, int* count) {
    std::unordered_map<int, int> ids;
    std::vector<int> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto [it, inserted] = ids.emplace(labels[i], static_cast<int>(ids.size()));
        out[i] = it->second;
    }
    *count = static_cast<int>(ids.size());
    return out;
}

void check_pair(std::span<const int> truth, std::span<const int> pred) {
    if (truth.size() != pred.size())
        throw DimensionError("label vectors differ in length (" + std::to_string(truth.size()) +
                             " vs " + std::to_string(pred.size()) + ")");
    if (truth.size() < 2) throw DimensionError("need at least two labelled points");
}

struct PairCounts {
    double same_both = 0;   // sum over cells of C(n_ij, 2)
    double same_truth = 0;  // sum over rows of C(a_i, 2)
    double same_pred = 0;   // sum over columns of C(b_j, 2)
    double total = 0;       // C(n, 2)
};

PairCounts contingency_counts(std::span<const int> truth, std::span<const int> pred) {
    int kt = 0, kp = 0;
    const auto t = compact(truth, &kt);
    const auto p = compact(pred, &kp);
    std::map<std::pair<int, int>, std::int64_t> cells;
    std::vector<std::int64_t> rows(kt, 0), cols(kp, 0);
    for (std::size_t i = 0; i < t.size(); ++i) {
        ++cells[{t[i], p[i]}];
        ++rows[t[i]];
        ++cols[p[i]];
    }
    PairCounts c;
    for (const auto& [cell, count] : cells) c.same_both += choose2(count);
    for (auto r : rows) c.same_truth += choose2(r);
    for (auto q : cols) c.same_pred += choose2(q);
    c.total = choose2(static_cast<std::int64_t>(t.size()));
    return c;
}

std::map<int, std::vector<Index>> members_by_cluster(std::span<const int> labels) {
    std::map<int, std::vector<Index>> groups;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] != kNoise) groups[labels[i]].push_back(static_cast<Index>(i));
    return groups;
}

}  // namespace

double ClusterResult::noise_fraction() const {
    if (labels.empty()) return 0.0;
    const auto noise = std::count(labels.begin(), labels.end(), kNoise);
    return static_cast<double>(noise) / static_cast<double>(labels.size());
}

ClusterResult dbscan(const Eigen::MatrixXd& points, double epsilon, int min_pts) {
    if (!(epsilon > 0) || !std::isfinite(epsilon))
        throw ConfigError("epsilon", "epsilon must be positive");
    if (min_pts < 1) throw ConfigError("min_pts", "min_pts must be at least 1");
    const Index n = points.rows();

    std::vector<std::vector<Index>> neighbours(n);
    for (Index i = 0; i < n; ++i) {
        neighbours[i].push_back(i);
        for (Index j = 0; j < i; ++j) {
            if ((points.row(i) - points.row(j)).norm() <= epsilon) {
                neighbours[i].push_back(j);
                neighbours[j].push_back(i);
            }
        }
    }
    for (auto& nb : neighbours) std::sort(nb.begin(), nb.end());
    auto is_core = [&](Index i) { return static_cast<Index>(neighbours[i].size()) >= min_pts; };

    constexpr int kUnvisited = 0;
    std::vector<int> label(n, kUnvisited);
    int cluster = 0;
    std::deque<Index> queue;
    for (Index i = 0; i < n; ++i) {
        if (label[i] != kUnvisited) continue;
        if (!is_core(i)) {
            label[i] = kNoise;
            continue;
        }
        ++cluster;
        label[i] = cluster;
        queue.assign(neighbours[i].begin(), neighbours[i].end());
        while (!queue.empty()) {
            const Index j = queue.front();
            queue.pop_front();
            if (label[j] == kNoise) label[j] = cluster;  // border point
            if (label[j] != kUnvisited) continue;
            label[j] = cluster;
            if (is_core(j)) queue.insert(queue.end(), neighbours[j].begin(), neighbours[j].end());
        }
    }

    ClusterResult out;
    out.labels = canonical_labels(label);
    out.epsilon = epsilon;
    out.min_pts = min_pts;
    out.k = cluster;
    return out;
}

std::vector<int> canonical_labels(std::span<const int> labels) {
    std::unordered_map<int, int> rename;
    std::vector<int> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == kNoise) {
            out[i] = kNoise;
            continue;
        }
        auto [it, inserted] = rename.emplace(labels[i], static_cast<int>(rename.size()) + 1);
        out[i] = it->second;
    }
    return out;
}

std::vector<int> noise_as_singletons(std::span<const int> labels) {
    int next = 0;
    for (int l : labels) next = std::max(next, l);
    std::vector<int> out(labels.begin(), labels.end());
    for (int& l : out)
        if (l == kNoise) l = ++next;
    return out;
}

double rand_index(std::span<const int> truth, std::span<const int> pred) {
    check_pair(truth, pred);
    const PairCounts c = contingency_counts(truth, pred);
    // Pairs together in both plus pairs apart in both.
    const double agree = c.same_both + (c.total - c.same_truth - c.same_pred + c.same_both);
    return agree / c.total;
}

double adjusted_rand_index(std::span<const int> truth, std::span<const int> pred) {
    check_pair(truth, pred);
    const PairCounts c = contingency_counts(truth, pred);
    const double expected = c.same_truth * c.same_pred / c.total;
    const double maximum = 0.5 * (c.same_truth + c.same_pred);
    if (maximum == expected) {
        // Both partitions are trivial (one cluster, or all singletons).
        return c.same_truth == c.same_pred ? 1.0 : 0.0;
    }
    return (c.same_both - expected) / (maximum - expected);
}

std::vector<double> silhouette_samples(const Eigen::MatrixXd& points, std::span<const int> labels) {
    const Index n = points.rows();
    if (static_cast<Index>(labels.size()) != n)
        throw DimensionError("labels do not match point count");
    const auto groups = members_by_cluster(labels);
    if (groups.size() < 2)
        throw UndefinedMetricError("silhouette needs at least two non-noise clusters");

    std::vector<double> out(n, std::numeric_limits<double>::quiet_NaN());
    for (Index i = 0; i < n; ++i) {
        if (labels[i] == kNoise) continue;
        const auto& own = groups.at(labels[i]);
        if (own.size() == 1) {
            out[i] = 0.0;
            continue;
        }
        double a = 0.0;
        for (Index j : own)
            if (j != i) a += (points.row(i) - points.row(j)).norm();
        a /= static_cast<double>(own.size() - 1);
        double b = std::numeric_limits<double>::infinity();
        for (const auto& [id, members] : groups) {
            if (id == labels[i]) continue;
            double sum = 0.0;
            for (Index j : members) sum += (points.row(i) - points.row(j)).norm();
            b = std::min(b, sum / static_cast<double>(members.size()));
        }
        const double denom = std::max(a, b);
        out[i] = denom > 0 ? (b - a) / denom : 0.0;
    }
    return out;
}

double silhouette(const Eigen::MatrixXd& points, std::span<const int> labels) {
    const auto samples = silhouette_samples(points, labels);
    double sum = 0.0;
    int count = 0;
    for (double s : samples) {
        if (std::isnan(s)) continue;
        sum += s;
        ++count;
    }
    return sum / count;
}

double calinski_harabasz(const Eigen::MatrixXd& points, std::span<const int> labels,
                         bool* degenerate) {
    if (static_cast<Index>(labels.size()) != points.rows())
        throw DimensionError("labels do not match point count");
    if (degenerate) *degenerate = false;
    const auto groups = members_by_cluster(labels);
    const Index k = static_cast<Index>(groups.size());
    Index n = 0;
    for (const auto& [id, members] : groups) n += static_cast<Index>(members.size());
    if (k < 2) throw UndefinedMetricError("Calinski-Harabasz needs at least two clusters");
    if (k > n - 1) throw UndefinedMetricError("Calinski-Harabasz needs k <= n - 1");

    Eigen::RowVectorXd overall = Eigen::RowVectorXd::Zero(points.cols());
    for (const auto& [id, members] : groups)
        for (Index j : members) overall += points.row(j);
    overall /= static_cast<double>(n);

    double between = 0.0, within = 0.0;
    for (const auto& [id, members] : groups) {
        Eigen::RowVectorXd centroid = Eigen::RowVectorXd::Zero(points.cols());
        for (Index j : members) centroid += points.row(j);
        centroid /= static_cast<double>(members.size());
        between += static_cast<double>(members.size()) * (centroid - overall).squaredNorm();
        for (Index j : members) within += (points.row(j) - centroid).squaredNorm();
    }
    if (within == 0.0) {
        if (degenerate) *degenerate = true;
        return std::numeric_limits<double>::infinity();
    }
    return (between / static_cast<double>(k - 1)) / (within / static_cast<double>(n - k));
}

std::string ClusterScore::key() const {
    std::ostringstream out;
    out << "eps=" << epsilon << ",minpts=" << min_pts;
    return out.str();
}

ClusterSelection select_clustering(const Eigen::MatrixXd& points,
                                   const std::vector<double>& epsilon_grid,
                                   const std::vector<int>& minpts_grid,
                                   const SelectionRules& rules) {
    if (epsilon_grid.empty() || minpts_grid.empty())
        throw ConfigError("cluster_grid", "epsilon and min_pts grids must be non-empty");

    ClusterSelection out;
    const ClusterScore* best = nullptr;
    std::size_t best_index = 0;
    std::vector<ClusterResult> results;
    for (double eps : epsilon_grid) {
        for (int m : minpts_grid) {
            ClusterResult r = dbscan(points, eps, m);
            ClusterScore s;
            s.epsilon = eps;
            s.min_pts = m;
            s.k = r.k;
            s.noise_fraction = r.noise_fraction();
            if (r.k < 2) {
                s.reason = "fewer than 2 clusters";
            } else if (r.k > rules.k_max) {
                s.reason = "more than " + std::to_string(rules.k_max) + " clusters";
            } else if (s.noise_fraction > rules.max_noise_fraction) {
                s.reason = "noise fraction above limit";
            } else {
                s.silhouette = silhouette(points, r.labels);
                s.chi = calinski_harabasz(points, r.labels);
                s.admissible = true;
            }
            out.table.push_back(s);
            results.push_back(std::move(r));
        }
    }
    for (std::size_t i = 0; i < out.table.size(); ++i) {
        const ClusterScore& s = out.table[i];
        if (!s.admissible) continue;
        bool take = best == nullptr;
        if (!take) {
            if (s.silhouette != best->silhouette)
                take = s.silhouette > best->silhouette;
            else if (s.chi != best->chi)
                take = s.chi > best->chi;
            else if (s.epsilon != best->epsilon)
                take = s.epsilon < best->epsilon;
            else
                take = s.min_pts < best->min_pts;
        }
        if (take) {
            best = &s;
            best_index = i;
        }
    }
    if (best == nullptr) {
        std::ostringstream msg;
        msg << "no admissible clustering on the grid:";
        for (const auto& s : out.table)
            msg << " [" << s.key() << ": k=" << s.k << ", noise=" << s.noise_fraction << ", "
                << s.reason << "]";
        throw UndefinedMetricError(msg.str());
    }
    out.result = std::move(results[best_index]);
    return out;
}

std::vector<double> default_epsilon_grid(const Eigen::MatrixXd& points) {
    double diag = 0.0;
    if (points.rows() > 0)
        diag = (points.colwise().maxCoeff() - points.colwise().minCoeff()).norm();
    if (!(diag > 0)) diag = 1.0;
    std::vector<double> grid;
    for (double f : {0.005, 0.01, 0.02, 0.05, 0.1, 0.2}) grid.push_back(f * diag);
    return grid;
}

std::vector<int> default_minpts_grid() { return {3, 5, 10}; }

}  // namespace flat
