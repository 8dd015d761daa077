#pragma once

#include <Eigen/Dense>

namespace qode {

/// Dense matrix exponential, scaling-and-squaring with a degree-13 Pade
/// approximant. Intended for the small mixing matrices used here.
Eigen::MatrixXd matrix_exp(const Eigen::MatrixXd& a);

/// Log of cosh without overflow for large |x|.
double log_cosh(double x);

}  // namespace qode
