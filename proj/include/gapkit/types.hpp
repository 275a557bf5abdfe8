#pragma once

#include <Eigen/Dense>

namespace gapkit {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
// Embedding rows are stored row-major so one sample is contiguous in memory.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace gapkit
