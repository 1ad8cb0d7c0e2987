#include "flat/spatial.hpp"

#include <cmath>

#include "flat/error.hpp"

namespace flat {

bool all_finite(const Eigen::Ref<const Eigen::MatrixXd>& m) {
    return m.allFinite();
}

void SpatialDataset::validate() const {
    const Index rows = coords.rows();
    if (rows < 1) throw DimensionError("dataset has no locations");
    if (coords.cols() != 2 && coords.cols() != 3)
        throw DimensionError("coordinates must have 2 or 3 columns, got " +
                             std::to_string(coords.cols()));
    if (covariates.rows() != rows)
        throw DimensionError("covariate rows (" + std::to_string(covariates.rows()) +
                             ") != locations (" + std::to_string(rows) + ")");
    if (response.size() != rows)
        throw DimensionError("response length (" + std::to_string(response.size()) +
                             ") != locations (" + std::to_string(rows) + ")");
    if (covariates.cols() < 1) throw DimensionError("need at least one covariate");
    if (static_cast<Index>(covariate_names.size()) != covariates.cols())
        throw DimensionError("covariate_names has " + std::to_string(covariate_names.size()) +
                             " entries for " + std::to_string(covariates.cols()) + " columns");
    if (!coords.allFinite()) throw NonFiniteError("non-finite coordinate");
    if (!covariates.allFinite()) throw NonFiniteError("non-finite covariate");
    if (!response.allFinite()) throw NonFiniteError("non-finite response");
}

void CoefficientField::validate() const {
    if (beta.rows() < 1 || beta.cols() < 1) throw DimensionError("empty coefficient field");
    if (!covariate_names.empty() && static_cast<Index>(covariate_names.size()) != beta.cols())
        throw DimensionError("coefficient names do not match column count");
    if (!beta.allFinite()) throw NonFiniteError("non-finite coefficient");
}

void CoefficientField::validate_against(const SpatialDataset& ds) const {
    validate();
    if (beta.rows() != ds.n() || beta.cols() != ds.p())
        throw DimensionError("coefficient field is " + std::to_string(beta.rows()) + "x" +
                             std::to_string(beta.cols()) + ", dataset is " +
                             std::to_string(ds.n()) + "x" + std::to_string(ds.p()));
}

Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& rows) {
    const Index n = rows.rows();
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
    for (Index j = 0; j < n; ++j) {
        for (Index i = j + 1; i < n; ++i) {
            const double v = (rows.row(i) - rows.row(j)).norm();
            d(i, j) = v;
            d(j, i) = v;
        }
    }
    return d;
}

Eigen::MatrixXd euclidean_distance_matrix(const SpatialDataset& ds) {
    if (ds.coords.rows() < 2) throw DimensionError("distance matrix needs n >= 2");
    if (!ds.coords.allFinite()) throw NonFiniteError("non-finite coordinate");
    return pairwise_distances(ds.coords);
}

Eigen::MatrixXd coefficient_distance_matrix(const CoefficientField& cf) {
    cf.validate();
    return pairwise_distances(cf.beta);
}

void standardize_coordinates(SpatialDataset& ds) {
    for (Index c = 0; c < ds.coords.cols(); ++c) {
        auto col = ds.coords.col(c);
        const double lo = col.minCoeff();
        const double span = col.maxCoeff() - lo;
        if (span > 0)
            col = (col.array() - lo) / span;
        else
            col.setZero();
    }
}

void standardize_covariates(SpatialDataset& ds) {
    const double n = static_cast<double>(ds.n());
    for (Index k = 0; k < ds.p(); ++k) {
        auto col = ds.covariates.col(k);
        const double mean = col.mean();
        const double sd = std::sqrt((col.array() - mean).square().sum() / n);
        if (sd > 0) col = (col.array() - mean) / sd;
    }
}

void add_intercept(SpatialDataset& ds) {
    Eigen::MatrixXd cov(ds.n(), ds.p() + 1);
    cov.col(0).setOnes();
    cov.rightCols(ds.p()) = ds.covariates;
    ds.covariates = std::move(cov);
    ds.covariate_names.insert(ds.covariate_names.begin(), "intercept");
}

}  // namespace flat
