#pragma once

#include <Eigen/Dense>

namespace scamp {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
/// Row-major dense matrix. Used for p x L signals and n x L residuals so
/// that a row (one item, one test) is contiguous.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

} // namespace scamp
