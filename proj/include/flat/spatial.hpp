#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace flat {

using Index = Eigen::Index;

/// One observation site. `id` is its row in the owning dataset.
struct Location {
    Index id = 0;
    Eigen::VectorXd coords;
};

/// Regression input: y(s_i) = beta(s_i)^T x(s_i) + noise.
///
/// Rows are ordered by location id, so row i belongs to location i.
/// An intercept is an explicit all-ones covariate column.
struct SpatialDataset {
    Eigen::MatrixXd coords;      // n x d, d in {2, 3}
    Eigen::MatrixXd covariates;  // n x p
    Eigen::VectorXd response;    // n
    std::vector<std::string> covariate_names;

    Index n() const { return coords.rows(); }
    Index p() const { return covariates.cols(); }
    Index dim() const { return coords.cols(); }
    Location location(Index i) const { return {i, coords.row(i).transpose()}; }

    /// Throws DimensionError or NonFiniteError.
    void validate() const;
};

/// Per-location coefficient vectors; entry (i, k) is beta_k(s_i).
struct CoefficientField {
    Eigen::MatrixXd beta;  // n x p
    std::vector<std::string> covariate_names;

    Index n() const { return beta.rows(); }
    Index p() const { return beta.cols(); }

    void validate() const;
    void validate_against(const SpatialDataset& ds) const;
};

Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& rows);

/// D[i][j] = ||coords_i - coords_j||_2. Requires n >= 2.
Eigen::MatrixXd euclidean_distance_matrix(const SpatialDataset& ds);

/// D~[i][j] = ||beta(s_i) - beta(s_j)||_2.
Eigen::MatrixXd coefficient_distance_matrix(const CoefficientField& cf);

/// Rescales each coordinate axis to [0, 1]. Constant axes map to 0.
void standardize_coordinates(SpatialDataset& ds);

/// Z-scores every non-constant covariate column. Constant columns (such as an
/// intercept) are left untouched.
void standardize_covariates(SpatialDataset& ds);

/// Appends an all-ones column named "intercept" as the first covariate.
void add_intercept(SpatialDataset& ds);

bool all_finite(const Eigen::Ref<const Eigen::MatrixXd>& m);

}  // namespace flat
