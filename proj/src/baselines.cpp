#include "flat/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "flat/error.hpp"

namespace flat {

namespace {

struct LocalSolve {
    Eigen::VectorXd beta;
    bool ok = false;
};

// Weighted least squares at one site. `skip` excludes a row (leave-one-out).
LocalSolve local_fit(const SpatialDataset& ds, const Eigen::MatrixXd& dist, Index site,
                     double bandwidth, double ridge, Index skip) {
    const Index n = ds.n();
    const Index p = ds.p();
    const double scale = 1.0 / (2.0 * bandwidth * bandwidth);
    Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(p);
    for (Index j = 0; j < n; ++j) {
        if (j == skip) continue;
        const double d = dist(site, j);
        const double w = std::exp(-d * d * scale);
        if (w == 0.0) continue;
        const auto x = ds.covariates.row(j).transpose();
        normal.selfadjointView<Eigen::Lower>().rankUpdate(x, w);
        rhs.noalias() += w * ds.response[j] * x;
    }
    normal = normal.selfadjointView<Eigen::Lower>();
    normal.diagonal().array() += ridge;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
    LocalSolve out;
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return out;
    out.beta = ldlt.solve(rhs);
    out.ok = out.beta.allFinite();
    return out;
}

double loo_score(const SpatialDataset& ds, const Eigen::MatrixXd& dist, double bandwidth,
                 double ridge) {
    double score = 0.0;
    for (Index i = 0; i < ds.n(); ++i) {
        const LocalSolve s = local_fit(ds, dist, i, bandwidth, ridge, i);
        const double e = ds.response[i] - (s.ok ? ds.covariates.row(i).dot(s.beta) : 0.0);
        score += e * e;
    }
    return score;
}

}  // namespace

Eigen::VectorXd pooled_ols(const SpatialDataset& ds) {
    return ds.covariates.colPivHouseholderQr().solve(ds.response);
}

std::vector<double> default_bandwidth_grid(const SpatialDataset& ds, int points) {
    const Eigen::MatrixXd dist = euclidean_distance_matrix(ds);
    const Index n = ds.n();
    std::vector<double> nearest;
    nearest.reserve(n);
    for (Index i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (Index j = 0; j < n; ++j)
            if (j != i && dist(i, j) > 0) best = std::min(best, dist(i, j));
        if (std::isfinite(best)) nearest.push_back(best);
    }
    double lo = 1e-3;
    if (!nearest.empty()) {
        std::nth_element(nearest.begin(), nearest.begin() + nearest.size() / 2, nearest.end());
        lo = 0.5 * nearest[nearest.size() / 2];
    }
    const double hi = std::max(2.0 * dist.maxCoeff(), 2.0 * lo);
    std::vector<double> grid;
    for (int i = 0; i < points; ++i)
        grid.push_back(lo * std::pow(hi / lo, points == 1 ? 0.0 : double(i) / (points - 1)));
    return grid;
}

double gwr_loo_score(const SpatialDataset& ds, double bandwidth, double ridge) {
    return loo_score(ds, euclidean_distance_matrix(ds), bandwidth, ridge);
}

GwrFit fit_gwr(const SpatialDataset& ds, const GwrConfig& config) {
    ds.validate();
    if (ds.n() <= ds.p()) throw DimensionError("GWR needs more locations than covariates");
    if (config.bandwidth && (!(*config.bandwidth > 0) || !std::isfinite(*config.bandwidth)))
        throw ConfigError("bandwidth", "bandwidth must be positive");
    if (!(config.ridge >= 0)) throw ConfigError("ridge", "ridge must be nonnegative");

    GwrFit fit;
    const Eigen::MatrixXd dist = euclidean_distance_matrix(ds);
    if (config.bandwidth) {
        fit.bandwidth = *config.bandwidth;
    } else {
        std::vector<double> grid = config.bandwidth_grid;
        if (grid.empty()) grid = default_bandwidth_grid(ds);
        double best = std::numeric_limits<double>::infinity();
        for (double b : grid) {
            if (!(b > 0)) throw ConfigError("bandwidth_grid", "bandwidths must be positive");
            const double score = loo_score(ds, dist, b, config.ridge);
            fit.cv_scores.emplace_back(b, score);
            if (score < best || (score == best && b < fit.bandwidth)) {
                best = score;
                fit.bandwidth = b;
            }
        }
    }

    fit.beta.beta.resize(ds.n(), ds.p());
    fit.beta.covariate_names = ds.covariate_names;
    fit.flagged.assign(ds.n(), 0);
    Eigen::VectorXd pooled;
    for (Index i = 0; i < ds.n(); ++i) {
        const LocalSolve s = local_fit(ds, dist, i, fit.bandwidth, config.ridge, -1);
        if (s.ok) {
            fit.beta.beta.row(i) = s.beta.transpose();
        } else {
            if (pooled.size() == 0) pooled = pooled_ols(ds);
            fit.beta.beta.row(i) = pooled.transpose();
            fit.flagged[i] = 1;
        }
    }
    return fit;
}

FusedFit fit_scc(const SpatialDataset& ds, std::optional<double> lambda,
                 const CdOptions& options) {
    return lambda ? spatial_tree_fit(ds, *lambda, options) : spatial_tree_fit_auto(ds, {}, options);
}

}  // namespace flat
