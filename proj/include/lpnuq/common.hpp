#pragma once

#include <Eigen/Dense>

namespace lpnuq {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

} // namespace lpnuq
