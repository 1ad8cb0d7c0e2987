#pragma once

#include <vector>

#include <Eigen/Dense>

namespace flat {

enum class SdqMethod { Axis, NearestNeighbor };

/// Spatial difference quotient: a finite-difference stand-in for the gradient
/// magnitude of a scalar field. `defined[i] == 0` marks points where the
/// quotient does not exist; their value is NaN.
struct SdqField {
    Eigen::VectorXd values;
    std::vector<char> defined;
    SdqMethod method = SdqMethod::Axis;
};

/// Locations must form a full rectilinear grid. Along each axis the next grid
/// neighbour is used, or the previous one on the last line; an axis with a
/// single level contributes nothing.
SdqField sdq_axis(const Eigen::MatrixXd& coords, const Eigen::VectorXd& field);

/// Uses the two nearest locations s_j, s_k (ties to lower index) and the angle
/// between s_i->s_j and s_i->s_k. Points with |sin(angle)| below `min_sin` are
/// left undefined.
SdqField sdq_nn(const Eigen::MatrixXd& coords, const Eigen::VectorXd& field,
                double min_sin = 1e-6);

/// The two-neighbour quotient for differences delta_j over distance d_ij and
/// delta_k over d_ik, with included angle `angle_gamma` (radians).
double nn_quotient(double delta_j, double d_ij, double delta_k, double d_ik, double angle_gamma);

}  // namespace flat
