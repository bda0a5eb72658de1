#pragma once

#include <complex>

#include <Eigen/Dense>

namespace blaircomp {

using Complex = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;

}  // namespace blaircomp
