#pragma once

#include <limits>

#include <Eigen/Core>

namespace selfsel {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// d x k matrix whose columns are the regressors w_1 ... w_k.
using RegressorMatrix = Eigen::MatrixXd;

}  // namespace selfsel
