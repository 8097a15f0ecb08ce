#pragma once

#include <complex>

#include <Eigen/Dense>

namespace nsstab {

using Complex = std::complex<double>;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using Index = Eigen::Index;

}  // namespace nsstab
