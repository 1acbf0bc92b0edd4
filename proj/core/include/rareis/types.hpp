#pragma once

#include <Eigen/Dense>

namespace rareis {

using Vector = Eigen::VectorXd;

/// Row-major so that each sample point is a contiguous row.
using PointMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// A model input in R^d.
using Point = Eigen::VectorXd;

/// Mean of the instrumental Gaussian N(theta, I_d).
using ShiftVector = Eigen::VectorXd;

enum class Tail { kRight, kLeft };

}  // namespace rareis
