#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "flat/fusion_graph.hpp"
#include "flat/spatial.hpp"

namespace flat {

struct LambdaPair {
    double lambda1 = 0.0;
    double lambda2 = 0.0;
};

/// Default design budget: n * n * p entries, enough for n = 4000, p = 5.
inline constexpr double kDefaultDesignBudget = 4000.0 * 4000.0 * 5.0;

/// lambda2/lambda1 used wherever the sparsity row must exist but carries no
/// modelling intent (the spatial-tree initializer and SCC).
inline constexpr double kRatioFloor = 1e-4;

struct FlatConfig {
    double lambda1 = 0.1;
    double lambda2 = 0.01;
    double gamma = 1.0;
    double cd_tolerance = 1e-6;
    int max_sweeps = 10000;
    std::vector<LambdaPair> lambda_grid;
    /// Penalty of the spatial-tree initializer; chosen by BIC when empty.
    std::optional<double> init_lambda;
    double design_budget = kDefaultDesignBudget;

    void validate() const;
};

/// sign(x) * max(|x| - lambda, 0).
inline double soft_threshold(double x, double lambda) {
    if (x > lambda) return x - lambda;
    if (x < -lambda) return x + lambda;
    return 0.0;
}

/// Reparameterized design [diag(x_1) H~^{-1}, ..., diag(x_p) H~^{-1}] with its
/// squared column norms.
struct Design {
    Eigen::MatrixXd matrix;
    Eigen::VectorXd col_sq_norms;
    Index n = 0;
    Index p = 0;

    static Design from_matrix(Eigen::MatrixXd m, Index blocks = 1);
};

Design build_design(const SpatialDataset& ds, const FusionGraph& fg,
                    double budget = kDefaultDesignBudget);

struct CdOptions {
    double tolerance = 1e-6;
    int max_sweeps = 10000;
    /// Recompute the objective after every sweep and fail loudly if it rises.
    bool check_monotone = false;
    bool record_trace = false;
};

struct CdResult {
    Eigen::VectorXd theta;
    double objective = 0.0;
    int sweeps = 0;
    bool converged = false;
    std::vector<double> trace;  // per-sweep objective when requested
};

/// 0.5 * ||y - X theta||^2 + lambda * ||theta||_1.
double lasso_objective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& theta, double lambda);

/// Largest violation of the lasso optimality conditions at theta.
double kkt_violation(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                     const Eigen::VectorXd& theta, double lambda);

/// Cyclic coordinate descent with exact coordinate minimization for the
/// problem above. A sweep is one pass over every coordinate; between sweeps
/// the current nonzero coordinates are cycled until they settle. Stops when a
/// sweep moves theta by less than `tolerance` in the 2-norm. Zero columns keep
/// their coordinate at 0. Throws ConvergenceError after `max_sweeps`.
CdResult coordinate_descent(const Design& design, const Eigen::VectorXd& y, double lambda,
                            const CdOptions& options,
                            const Eigen::VectorXd* warm_start = nullptr);

/// Result of any tree-fused fit (FLAT, SCC, the initializer).
struct FusedFit {
    CoefficientField beta;
    Eigen::MatrixXd theta;  // n x p, column k is theta_k
    double objective = 0.0;
    int sweeps = 0;
    bool converged = false;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double rss = 0.0;
    int df = 0;
    std::shared_ptr<const FusionGraph> graph;
};

/// Fits min 0.5||y - X beta||^2 + lambda1 sum_k ||diag(pi) H beta_k||_1
///                               + lambda2 sum_k |1^T beta_k|
/// through the H~ reparameterization, with lambda2 = ratio * lambda1.
FusedFit fit_fused(const SpatialDataset& ds, std::shared_ptr<const FusionGraph> graph,
                   const Design& design, double lambda1, const CdOptions& options,
                   const Eigen::MatrixXd* warm_beta = nullptr);

/// Number of distinct values in each column (gap > tol), summed over columns.
int fused_degrees_of_freedom(const Eigen::MatrixXd& beta, double tol = 1e-6);

double residual_sum_of_squares(const SpatialDataset& ds, const Eigen::MatrixXd& beta);

/// n log(RSS / n) + log(n) df. RSS is floored at n * 1e-300.
double bic_score(Index n, double rss, int df);

struct GridScore {
    LambdaPair lambdas;
    double bic = 0.0;
    double rss = 0.0;
    int df = 0;
    bool ok = false;
    std::string error;
};

/// Penalty scale for default grids: max |X~_j^T y| over the tree-edge columns,
/// which do not depend on lambda2/lambda1.
double edge_correlation_scale(const SpatialDataset& ds, const FusionGraph& fg);

/// 8 x 8 log grid: lambda1 in [5e-4, 5] * scale, lambda2 / lambda1 in [1e-2, 1].
/// This is [1e-3, 1e1] * scale / n for the loss averaged over n, rescaled to
/// the half residual sum of squares the solver minimizes.
std::vector<LambdaPair> default_lambda_grid(double scale, int points = 8);

/// lambda in [5e-4, 5] * scale on a log grid, for single-penalty fits.
std::vector<double> default_single_grid(double scale, int points = 8);

struct TreeSelection {
    std::vector<GridScore> scores;  // in grid order
    LambdaPair best;
    FusedFit best_fit;
};

/// Fits every grid pair over a fixed tree and weights, scoring by BIC. Grid
/// points sharing lambda2/lambda1 share one design; each fit warm-starts from
/// the previous one. Ties prefer smaller lambda1, then smaller lambda2.
TreeSelection select_on_tree(const SpatialDataset& ds, const SpanningTree& tree,
                             const Eigen::VectorXd& pi, const std::vector<LambdaPair>& grid,
                             const CdOptions& options, double budget = kDefaultDesignBudget);

/// Pilot estimate for the adaptive stage: fused lasso over the spatial-distance MST with
/// unit edge weights and the lambda2/lambda1 floor.
CoefficientField initial_estimate(const SpatialDataset& ds, double init_lambda,
                                  const CdOptions& options = {},
                                  double budget = kDefaultDesignBudget);

/// Same, returning the full fit.
FusedFit spatial_tree_fit(const SpatialDataset& ds, double lambda, const CdOptions& options = {},
                          double budget = kDefaultDesignBudget);

/// Initializer with lambda chosen by BIC over `grid` (default grid when empty).
FusedFit spatial_tree_fit_auto(const SpatialDataset& ds, const std::vector<double>& grid = {},
                               const CdOptions& options = {},
                               double budget = kDefaultDesignBudget);

struct FlatFit {
    CoefficientField beta;
    Eigen::VectorXd theta;  // length n * p, blocks theta_1 .. theta_p
    double objective = 0.0;
    int sweeps = 0;
    bool converged = false;
    double rss = 0.0;
    int df = 0;
    FlatConfig config;
    std::shared_ptr<const FusionGraph> graph;
    CoefficientField initial;
    double init_lambda = 0.0;
};

/// Full two-stage estimator at (config.lambda1, config.lambda2).
FlatFit fit_flat(const SpatialDataset& ds, const FlatConfig& config);

struct LambdaSelection {
    LambdaPair best;
    std::vector<GridScore> scores;
    FlatFit fit;
};

/// Fits config.lambda_grid (the default grid when empty) and keeps the BIC
/// minimizer. The initializer and adaptive tree are computed once.
LambdaSelection select_lambdas(const SpatialDataset& ds, const FlatConfig& config);

}  // namespace flat
