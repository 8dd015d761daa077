#include "qode/linalg.hpp"

#include <cmath>

namespace qode {

Eigen::MatrixXd matrix_exp(const Eigen::MatrixXd& a) {
  using Eigen::MatrixXd;
  const auto n = a.rows();
  const double norm = a.cwiseAbs().colwise().sum().maxCoeff();  // 1-norm
  constexpr double kTheta13 = 5.371920351148152;
  int squarings = 0;
  if (norm > kTheta13) {
    squarings = static_cast<int>(std::ceil(std::log2(norm / kTheta13)));
  }
  const MatrixXd as = a / std::ldexp(1.0, squarings);

  static const double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                             1187353796428800.0,  129060195264000.0,   10559470521600.0,
                             670442572800.0,      33522128640.0,       1323241920.0,
                             40840800.0,          960960.0,            16380.0,
                             182.0,               1.0};
  const MatrixXd eye = MatrixXd::Identity(n, n);
  const MatrixXd a2 = as * as;
  const MatrixXd a4 = a2 * a2;
  const MatrixXd a6 = a2 * a4;
  const MatrixXd u =
      as * (a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 + b[3] * a2 +
            b[1] * eye);
  const MatrixXd v =
      a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * eye;

  MatrixXd r = (v - u).partialPivLu().solve(v + u);
  for (int s = 0; s < squarings; ++s) r = r * r;
  return r;
}

double log_cosh(double x) {
  const double ax = std::abs(x);
  return ax + std::log1p(std::exp(-2.0 * ax)) - std::log(2.0);
}

}  // namespace qode
