#pragma once

#include <cstdint>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "flat/spatial.hpp"

namespace testing {

inline Eigen::MatrixXd uniform(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed,
                               double lo = 0.0, double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = u(rng);
    return m;
}

inline Eigen::MatrixXd normal(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = g(rng);
    return m;
}

inline flat::SpatialDataset make_dataset(const Eigen::MatrixXd& coords, const Eigen::MatrixXd& x,
                                         const Eigen::VectorXd& y) {
    flat::SpatialDataset ds;
    ds.coords = coords;
    ds.covariates = x;
    ds.response = y;
    for (Eigen::Index k = 0; k < x.cols(); ++k) ds.covariate_names.push_back("x" + std::to_string(k + 1));
    return ds;
}

/// Random locations, N(0,1) covariates and y = sum_k beta_k(s) x_k + noise.
inline flat::SpatialDataset varying_dataset(const Eigen::MatrixXd& beta, double sigma,
                                            std::uint64_t seed) {
    const Eigen::Index n = beta.rows(), p = beta.cols();
    Eigen::MatrixXd coords = uniform(n, 2, seed);
    Eigen::MatrixXd x = normal(n, p, seed + 1);
    Eigen::VectorXd y = (x.array() * beta.array()).rowwise().sum().matrix();
    y += sigma * normal(n, 1, seed + 2).col(0);
    return make_dataset(coords, x, y);
}

}  // namespace testing
