#include <cmath>
#include <limits>

#include <doctest.h>

#include "flat/error.hpp"
#include "flat/spatial.hpp"
#include "helpers.hpp"

using namespace flat;

TEST_CASE("euclidean distance of a 3-4-5 triangle") {
    Eigen::MatrixXd c(2, 2);
    c << 0, 0, 3, 4;
    auto ds = testing::make_dataset(c, Eigen::MatrixXd::Ones(2, 1), Eigen::VectorXd::Zero(2));
    const auto d = euclidean_distance_matrix(ds);
    CHECK(d(0, 1) == doctest::Approx(5.0));
    CHECK(d(1, 0) == doctest::Approx(5.0));
    CHECK(d(0, 0) == 0.0);
    CHECK(d(1, 1) == 0.0);
}

TEST_CASE("euclidean distances match per-pair recomputation") {
    const auto c = testing::uniform(5, 3, 11, -2, 2);
    auto ds = testing::make_dataset(c, Eigen::MatrixXd::Ones(5, 1), Eigen::VectorXd::Zero(5));
    const auto d = euclidean_distance_matrix(ds);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) {
            double s = 0;
            for (int a = 0; a < 3; ++a) s += (c(i, a) - c(j, a)) * (c(i, a) - c(j, a));
            CHECK(std::abs(d(i, j) - std::sqrt(s)) <= 1e-12);
        }
}

TEST_CASE("coefficient distances") {
    CoefficientField cf;
    cf.beta.resize(3, 2);
    cf.beta << 1, 0, 0, 1, 1, 0;
    cf.covariate_names = {"a", "b"};
    const auto d = coefficient_distance_matrix(cf);
    CHECK(d(0, 1) == doctest::Approx(std::sqrt(2.0)));
    CHECK(d(0, 2) == 0.0);

    cf.beta = testing::normal(6, 3, 5);
    cf.covariate_names = {"a", "b", "c"};
    const auto e = coefficient_distance_matrix(cf);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) {
            double s = 0;
            for (int k = 0; k < 3; ++k) s += std::pow(cf.beta(i, k) - cf.beta(j, k), 2);
            CHECK(std::abs(e(i, j) - std::sqrt(s)) <= 1e-12);
        }
}

TEST_CASE("distance matrices are metrics on sampled triples") {
    const auto c = testing::uniform(12, 2, 3);
    auto ds = testing::make_dataset(c, Eigen::MatrixXd::Ones(12, 1), Eigen::VectorXd::Zero(12));
    CoefficientField cf{testing::normal(12, 3, 4), {"a", "b", "c"}};
    for (const auto& d : {euclidean_distance_matrix(ds), coefficient_distance_matrix(cf)}) {
        CHECK((d - d.transpose()).cwiseAbs().maxCoeff() == 0.0);
        CHECK(d.diagonal().cwiseAbs().maxCoeff() == 0.0);
        CHECK(d.minCoeff() >= 0.0);
        for (int i = 0; i < 12; ++i)
            for (int j = 0; j < 12; ++j)
                for (int k = 0; k < 12; ++k) CHECK(d(i, k) <= d(i, j) + d(j, k) + 1e-12);
    }
}

TEST_CASE("validation error kinds") {
    auto ds = testing::varying_dataset(Eigen::MatrixXd::Ones(5, 2), 0.1, 1);
    CHECK_NOTHROW(ds.validate());

    auto bad = ds;
    bad.response.resize(4);
    CHECK_THROWS_AS(bad.validate(), DimensionError);

    bad = ds;
    bad.covariates(2, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(bad.validate(), NonFiniteError);

    bad = ds;
    bad.coords(0, 0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(bad.validate(), NonFiniteError);
    CHECK_THROWS_AS(euclidean_distance_matrix(bad), NonFiniteError);

    bad = ds;
    bad.coords = Eigen::MatrixXd::Zero(5, 4);
    CHECK_THROWS_AS(bad.validate(), DimensionError);

    bad = ds;
    bad.covariate_names.pop_back();
    CHECK_THROWS_AS(bad.validate(), DimensionError);

    auto one = testing::make_dataset(Eigen::MatrixXd::Zero(1, 2), Eigen::MatrixXd::Ones(1, 1),
                                     Eigen::VectorXd::Zero(1));
    CHECK_THROWS_AS(euclidean_distance_matrix(one), DimensionError);
}

TEST_CASE("standardization helpers") {
    auto ds = testing::varying_dataset(Eigen::MatrixXd::Ones(8, 2), 0.1, 2);
    ds.coords *= 7.0;
    ds.coords.array() += 3.0;
    standardize_coordinates(ds);
    CHECK(ds.coords.colwise().minCoeff().maxCoeff() == doctest::Approx(0.0));
    CHECK(ds.coords.colwise().maxCoeff().minCoeff() == doctest::Approx(1.0));

    add_intercept(ds);
    CHECK(ds.p() == 3);
    CHECK(ds.covariate_names.front() == "intercept");
    CHECK((ds.covariates.col(0).array() == 1.0).all());

    standardize_covariates(ds);
    CHECK((ds.covariates.col(0).array() == 1.0).all());
    for (int k = 1; k < 3; ++k) {
        const double mean = ds.covariates.col(k).mean();
        const double var = (ds.covariates.col(k).array() - mean).square().sum() / 8.0;
        CHECK(std::abs(mean) < 1e-12);
        CHECK(var == doctest::Approx(1.0));
    }
}
