#pragma once

#include <Eigen/Dense>

namespace nyscl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

}  // namespace nyscl
