#include "flat/sdq.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "flat/error.hpp"
#include "flat/spatial.hpp"

namespace flat {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Sorted distinct values of one axis, merging values closer than `tol`.
std::vector<double> axis_levels(const Eigen::VectorXd& values, double tol) {
    std::vector<double> sorted(values.data(), values.data() + values.size());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> levels;
    for (double v : sorted)
        if (levels.empty() || v - levels.back() > tol) levels.push_back(v);
    return levels;
}

Index level_of(const std::vector<double>& levels, double v, double tol) {
    auto it = std::lower_bound(levels.begin(), levels.end(), v - tol);
    return static_cast<Index>(it - levels.begin());
}

double quotient_from(double dj2_term, double dk2_term, double cross, double sin2) {
    const double value = (dj2_term + dk2_term - 2.0 * cross) / sin2;
    return std::sqrt(std::max(value, 0.0));
}

}  // namespace

double nn_quotient(double delta_j, double d_ij, double delta_k, double d_ik, double angle_gamma) {
    const double s = std::sin(angle_gamma);
    const double c = std::cos(angle_gamma);
    const double a = delta_j / d_ij;
    const double b = delta_k / d_ik;
    return quotient_from(a * a, b * b, a * b * c, s * s);
}

SdqField sdq_axis(const Eigen::MatrixXd& coords, const Eigen::VectorXd& field) {
    const Index n = coords.rows();
    const Index dims = coords.cols();
    if (field.size() != n) throw DimensionError("field length does not match locations");
    if (n < 2) throw DimensionError("sdq needs at least two locations");
    if (!coords.allFinite() || !field.allFinite())
        throw NonFiniteError("non-finite coordinate or field value");

    std::vector<std::vector<double>> levels(dims);
    std::vector<double> tols(dims);
    std::size_t cells = 1;
    for (Index d = 0; d < dims; ++d) {
        const double span = coords.col(d).maxCoeff() - coords.col(d).minCoeff();
        tols[d] = 1e-9 * std::max(span, 1.0);
        levels[d] = axis_levels(coords.col(d), tols[d]);
        cells *= levels[d].size();
    }
    if (cells != static_cast<std::size_t>(n))
        throw ValidationError("locations are not a rectilinear grid; use the nearest-neighbour "
                              "method (sdq_nn) instead");

    std::map<std::vector<Index>, Index> at;
    std::vector<std::vector<Index>> index_of(n, std::vector<Index>(dims));
    for (Index i = 0; i < n; ++i) {
        for (Index d = 0; d < dims; ++d) index_of[i][d] = level_of(levels[d], coords(i, d), tols[d]);
        if (!at.emplace(index_of[i], i).second)
            throw ValidationError("duplicate grid location; use the nearest-neighbour method "
                                  "(sdq_nn) instead");
    }

    SdqField out;
    out.method = SdqMethod::Axis;
    out.values.resize(n);
    out.defined.assign(n, 1);
    for (Index i = 0; i < n; ++i) {
        double sum = 0.0;
        for (Index d = 0; d < dims; ++d) {
            const Index count = static_cast<Index>(levels[d].size());
            if (count < 2) continue;
            std::vector<Index> key = index_of[i];
            key[d] += key[d] + 1 < count ? 1 : -1;
            const Index j = at.at(key);
            const double dist = (coords.row(i) - coords.row(j)).norm();
            const double q = (field[i] - field[j]) / dist;
            sum += q * q;
        }
        out.values[i] = std::sqrt(sum);
    }
    return out;
}

SdqField sdq_nn(const Eigen::MatrixXd& coords, const Eigen::VectorXd& field, double min_sin) {
    const Index n = coords.rows();
    if (field.size() != n) throw DimensionError("field length does not match locations");
    if (n < 3) throw DimensionError("nearest-neighbour sdq needs at least three locations");
    if (!coords.allFinite() || !field.allFinite())
        throw NonFiniteError("non-finite coordinate or field value");

    SdqField out;
    out.method = SdqMethod::NearestNeighbor;
    out.values.resize(n);
    out.defined.assign(n, 0);
    for (Index i = 0; i < n; ++i) {
        Index first = -1, second = -1;
        double d1 = std::numeric_limits<double>::infinity(), d2 = d1;
        for (Index j = 0; j < n; ++j) {
            if (j == i) continue;
            const double d = (coords.row(j) - coords.row(i)).norm();
            if (d < d1) {
                second = first;
                d2 = d1;
                first = j;
                d1 = d;
            } else if (d < d2) {
                second = j;
                d2 = d;
            }
        }
        out.values[i] = kNaN;
        if (!(d1 > 0) || !(d2 > 0)) continue;  // coincident locations

        const Eigen::VectorXd u = (coords.row(first) - coords.row(i)).transpose();
        const Eigen::VectorXd v = (coords.row(second) - coords.row(i)).transpose();
        const double cos_angle = std::clamp(u.dot(v) / (d1 * d2), -1.0, 1.0);
        const double sin2 = 1.0 - cos_angle * cos_angle;
        if (std::sqrt(sin2) < min_sin) continue;

        const double a = (field[i] - field[first]) / d1;
        const double b = (field[i] - field[second]) / d2;
        out.values[i] = quotient_from(a * a, b * b, a * b * cos_angle, sin2);
        out.defined[i] = 1;
    }
    return out;
}

}  // namespace flat
