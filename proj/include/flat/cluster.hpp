#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "flat/spatial.hpp"

namespace flat {

inline constexpr int kNoise = -1;

struct ClusterResult {
    std::vector<int> labels;  // kNoise or 1..k
    double epsilon = 0.0;
    int min_pts = 0;
    int k = 0;

    double noise_fraction() const;
};

/// DBSCAN on the rows of `points` with Euclidean distance. A point is core when
/// its closed epsilon-neighbourhood (itself included) holds at least `min_pts`
/// points. Points are scanned in ascending index; a border point joins the
/// first cluster that reaches it. Labels are renumbered by first occurrence.
ClusterResult dbscan(const Eigen::MatrixXd& points, double epsilon, int min_pts);

inline ClusterResult dbscan(const CoefficientField& cf, double epsilon, int min_pts) {
    return dbscan(cf.beta, epsilon, min_pts);
}

/// Renumbers labels 1..k by first occurrence, keeping kNoise.
std::vector<int> canonical_labels(std::span<const int> labels);

/// Gives every noise point its own fresh label.
std::vector<int> noise_as_singletons(std::span<const int> labels);

double rand_index(std::span<const int> truth, std::span<const int> pred);

/// Hubert-Arabie adjusted Rand index from the contingency table. Two
/// single-cluster partitions (or any pair where the index is 0/0) count as 1
/// when identical up to renaming and 0 otherwise.
double adjusted_rand_index(std::span<const int> truth, std::span<const int> pred);

/// Per-point silhouette; NaN for noise, 0 for members of singleton clusters.
std::vector<double> silhouette_samples(const Eigen::MatrixXd& points, std::span<const int> labels);

/// Mean silhouette over non-noise points. Needs two or more clusters.
double silhouette(const Eigen::MatrixXd& points, std::span<const int> labels);

/// Variance ratio criterion over non-noise points. Returns +infinity when the
/// within-cluster dispersion is zero and sets `*degenerate` if given.
double calinski_harabasz(const Eigen::MatrixXd& points, std::span<const int> labels,
                         bool* degenerate = nullptr);

struct ClusterScore {
    double epsilon = 0.0;
    int min_pts = 0;
    int k = 0;
    double noise_fraction = 0.0;
    double silhouette = 0.0;
    double chi = 0.0;
    bool admissible = false;
    std::string reason;

    std::string key() const;  // "eps=<e>,minpts=<m>"
};

struct SelectionRules {
    int k_max = 12;
    double max_noise_fraction = 0.2;
};

struct ClusterSelection {
    ClusterResult result;
    std::vector<ClusterScore> table;
};

/// Runs DBSCAN over the grid and keeps the admissible result with the highest
/// silhouette; ties go to higher CHI, then smaller epsilon, then smaller
/// min_pts. Admissible means 2 <= k <= k_max and noise within the limit.
/// Throws UndefinedMetricError when nothing is admissible.
ClusterSelection select_clustering(const Eigen::MatrixXd& points,
                                   const std::vector<double>& epsilon_grid,
                                   const std::vector<int>& minpts_grid,
                                   const SelectionRules& rules = {});

/// Bounding-box diagonal times {0.005, 0.01, 0.02, 0.05, 0.1, 0.2}.
std::vector<double> default_epsilon_grid(const Eigen::MatrixXd& points);
std::vector<int> default_minpts_grid();

}  // namespace flat
