#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

// Textbook GP posterior with an explicit matrix inverse and determinant, in
// long double. Inputs are already in the coordinates the kernel acts on (one
// point per column).
namespace oracle {

using LMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
using LVector = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

struct DenseGp {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  Eigen::VectorXd lengthscales;
  double signal_variance;
  double nugget;
  bool standardize = true;

  long double k(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
    long double r2 = 0.0L;
    for (int i = 0; i < a.size(); ++i) {
      const long double t = (static_cast<long double>(a[i]) - b[i]) / lengthscales[i];
      r2 += t * t;
    }
    return signal_variance * std::exp(-0.5L * r2);
  }

  long double center() const {
    if (!standardize) return 0.0L;
    long double m = 0.0L;
    for (int i = 0; i < y.size(); ++i) m += y[i];
    return m / y.size();
  }
  long double scale() const {
    if (!standardize) return 1.0L;
    const long double m = center();
    long double s = 0.0L;
    for (int i = 0; i < y.size(); ++i) s += (y[i] - m) * (y[i] - m);
    s = std::sqrt(s / y.size());
    return s > 1e-12L * std::max(1.0L, std::abs(m)) ? s : 1.0L;
  }

  LMatrix gram() const {
    const int n = static_cast<int>(x.cols());
    LMatrix g(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) g(i, j) = k(x.col(i), x.col(j)) + (i == j ? nugget : 0.0);
    return g;
  }

  LVector z() const {
    LVector out(y.size());
    for (int i = 0; i < y.size(); ++i) out[i] = (y[i] - center()) / scale();
    return out;
  }

  LVector cross(const Eigen::VectorXd& at) const {
    LVector ks(x.cols());
    for (int i = 0; i < x.cols(); ++i) ks[i] = k(at, x.col(i));
    return ks;
  }

  double mean(const Eigen::VectorXd& at) const {
    const LMatrix inv = gram().inverse();
    return static_cast<double>(center() + scale() * cross(at).dot(inv * z()));
  }

  double variance(const Eigen::VectorXd& at) const {
    const LMatrix inv = gram().inverse();
    const LVector ks = cross(at);
    return static_cast<double>(scale() * scale() * (k(at, at) - ks.dot(inv * ks)));
  }

  double log_marginal_likelihood() const {
    const LMatrix g = gram();
    const LVector zz = z();
    const long double n = zz.size();
    return static_cast<double>(-0.5L * zz.dot(g.inverse() * zz) - 0.5L * std::log(g.determinant()) -
                               0.5L * n * std::log(2.0L * 3.14159265358979323846264338327950288L));
  }
};

}  // namespace oracle
