#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "flat/spatial.hpp"

namespace flat {

/// One piece of a piecewise-constant surface on [0,1]^2. Ranges are half-open
/// [lo, hi); a disk includes its boundary.
struct Region {
    enum class Kind { All, XRange, YRange, Rect, Disk };
    Kind kind = Kind::All;
    double x0 = 0, x1 = 0, y0 = 0, y1 = 0;  // ranges and rectangles
    double cx = 0, cy = 0, radius = 0;      // disks
    double level = 0;

    bool contains(double x, double y) const;
};

/// First matching region wins; region i carries truth label i + 1.
struct Surface {
    std::vector<Region> regions;

    /// Throws ConfigError unless every point of a 201 x 201 lattice on
    /// [0,1]^2 falls in some region.
    void validate() const;
    int label_at(double x, double y) const;
    double value_at(double x, double y) const;
};

/// beta_1: bands in y {y < 0.5 -> 1, else 3}; beta_2: thirds in x {2, 4, 6};
/// beta_3: disk of radius 0.3 at the centre -> 5, else 2.
std::vector<Surface> default_surfaces();

struct SimulationSpec {
    Index n = 1000;
    double phi = 0.2;
    double r = 0.75;
    double sigma = 0.1;
    std::vector<Surface> surfaces = default_surfaces();
    int reps = 100;
    std::uint64_t seed = 0;

    /// Number of coefficients: x1, x2 and the intercept field.
    Index p() const { return 3; }
    void validate() const;
};

/// Zero-mean Gaussian process with covariance exp(-||s_i - s_j|| / phi). The
/// Cholesky factor is computed once; jitter starts at 1e-10 and grows tenfold
/// up to 1e-6 if factorization fails.
class GpSampler {
public:
    GpSampler(const Eigen::MatrixXd& coords, double phi);
    Eigen::VectorXd draw(std::mt19937_64& rng) const;
    double jitter() const { return jitter_; }

private:
    Eigen::MatrixXd lower_;
    double jitter_ = 0.0;
};

Eigen::VectorXd sample_gp(const Eigen::MatrixXd& coords, double phi, std::uint64_t seed);

struct CovariatePair {
    Eigen::VectorXd x1;
    Eigen::VectorXd x2;
};

/// x1 = z1, x2 = r z1 + sqrt(1 - r^2) z2.
CovariatePair make_covariates(const Eigen::VectorXd& z1, const Eigen::VectorXd& z2, double r);

/// n uniform locations on [0,1]^2.
Eigen::MatrixXd draw_locations(Index n, std::uint64_t seed);

struct Dgp {
    SpatialDataset data;
    CoefficientField truth;
    std::vector<std::vector<int>> labels;  // per coefficient, values 1..regions
};

/// One draw at fixed locations: y = beta_1 x1 + beta_2 x2 + beta_3 + N(0, sigma^2).
Dgp generate_dgp(const SimulationSpec& spec, const Eigen::MatrixXd& coords, const GpSampler& gp,
                 std::uint64_t seed);

/// Locations from spec.seed, then one draw.
Dgp generate_dgp(const SimulationSpec& spec);

/// Estimator under study: maps a dataset to a coefficient field.
struct Method {
    std::string name;
    std::function<CoefficientField(const SpatialDataset&)> fit;
};

enum class MethodKind { Flat, Scc, Gwr };

Method standard_method(MethodKind kind);
MethodKind parse_method(const std::string& name);

struct MetricEntry {
    std::string measure;  // RMSE, MAE, SD, RI, ARI, SC, CHI
    int coordinate = 0;   // 1-based
    std::string method;
    double value = 0.0;
};

struct MetricTable {
    std::vector<MetricEntry> entries;
    int reps = 0;
    int failures = 0;
    std::vector<std::string> failure_messages;

    double get(const std::string& measure, int coordinate, const std::string& method) const;
};

/// Accumulates per-location errors over replicates and averages the per-location
/// RMSE, MAE and SD over locations. Independent of any estimator.
struct ErrorSummary {
    double rmse = 0.0;
    double mae = 0.0;
    double sd = 0.0;
};
ErrorSummary summarize_errors(const std::vector<Eigen::VectorXd>& estimates,
                              const Eigen::VectorXd& truth);

struct ReplicationOptions {
    /// 0 picks std::thread::hardware_concurrency().
    unsigned threads = 0;
};

/// Locations are drawn once from spec.seed; replicate t (1-based) redraws
/// covariates and noise from spec.seed XOR t. Each estimate is clustered per
/// coefficient with select_clustering; a field with no admissible clustering
/// counts as one cluster with SC = CHI = 0.
MetricTable run_replications(const SimulationSpec& spec, const std::vector<Method>& methods,
                             const ReplicationOptions& options = {});

/// Table for a single estimate against known truth (T = 1, so SD is 0).
/// `labels` holds the true region labels of each coefficient.
MetricTable score_estimate(const CoefficientField& estimate, const CoefficientField& truth,
                           const std::vector<std::vector<int>>& labels,
                           const std::string& method);

}  // namespace flat
