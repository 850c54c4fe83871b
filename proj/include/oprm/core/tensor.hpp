#pragma once

#include <Eigen/Dense>

namespace oprm {

/// Row-major so that a sequence's per-token rows are contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

}  // namespace oprm
