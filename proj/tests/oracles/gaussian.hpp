#pragma once

#include <Eigen/Dense>
#include <cmath>

namespace oracle {

// KL(N(m1, s1) || N(m2, s2)) in closed form.
inline double gaussian_kl(const Eigen::VectorXd& m1, const Eigen::MatrixXd& s1, const Eigen::VectorXd& m2,
                          const Eigen::MatrixXd& s2) {
  const Eigen::MatrixXd inv2 = s2.inverse();
  const Eigen::VectorXd dm = m2 - m1;
  const double d = static_cast<double>(m1.size());
  return 0.5 * ((inv2 * s1).trace() + dm.dot(inv2 * dm) - d + std::log(s2.determinant() / s1.determinant()));
}

inline double normal_log_pdf(double x, double mu, double var) {
  return -0.5 * std::log(2.0 * M_PI * var) - 0.5 * (x - mu) * (x - mu) / var;
}

}  // namespace oracle
