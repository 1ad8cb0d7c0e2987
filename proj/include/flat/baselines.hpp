#pragma once

#include <optional>
#include <vector>

#include "flat/solver.hpp"
#include "flat/spatial.hpp"

namespace flat {

/// Geographically weighted regression with a Gaussian kernel
/// w_ij = exp(-d_ij^2 / (2 b^2)). An empty bandwidth means "auto": leave-one-out
/// prediction CV over `bandwidth_grid`, or over a default log grid when that
/// is empty too.
struct GwrConfig {
    std::optional<double> bandwidth;
    std::vector<double> bandwidth_grid;
    double ridge = 1e-8;
};

struct GwrFit {
    CoefficientField beta;
    double bandwidth = 0.0;
    /// Locations whose local system could not be solved; their rows hold the
    /// pooled least-squares coefficients instead.
    std::vector<char> flagged;
    /// Leave-one-out squared prediction error for every bandwidth tried (auto only).
    std::vector<std::pair<double, double>> cv_scores;
};

GwrFit fit_gwr(const SpatialDataset& ds, const GwrConfig& config = {});

/// Leave-one-out CV score of a fixed bandwidth.
double gwr_loo_score(const SpatialDataset& ds, double bandwidth, double ridge = 1e-8);

/// Log grid from half the median nearest-neighbour distance to twice the
/// largest pairwise distance.
std::vector<double> default_bandwidth_grid(const SpatialDataset& ds, int points = 20);

/// Ordinary least squares with one coefficient vector for every location.
Eigen::VectorXd pooled_ols(const SpatialDataset& ds);

/// Spatially clustered coefficients, realised as the fused lasso over the
/// spatial-distance MST with unit weights and the lambda2/lambda1 floor.
/// Identical to the FLAT initializer at equal lambda; BIC picks lambda when
/// none is given.
FusedFit fit_scc(const SpatialDataset& ds, std::optional<double> lambda = std::nullopt,
                 const CdOptions& options = {});

}  // namespace flat
