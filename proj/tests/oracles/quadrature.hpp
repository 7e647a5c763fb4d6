#pragma once

#include <cmath>
#include <functional>

namespace oracle {

// Composite Simpson rule with n (even) panels on [a, b].
inline double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  if (n % 2) ++n;
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

// -int p log p for the log-normal law of exp(Z), Z ~ N(mu, var), integrating over
// y = exp(t) so the integrand is smooth.
inline double lognormal_entropy_by_quadrature(double mu, double var) {
  const double sd = std::sqrt(var);
  auto log_p = [&](double y) {
    const double ly = std::log(y);
    return -std::log(y * sd * std::sqrt(2.0 * M_PI)) - (ly - mu) * (ly - mu) / (2.0 * var);
  };
  auto integrand = [&](double t) {
    const double y = std::exp(t);
    const double lp = log_p(y);
    return -std::exp(lp) * lp * y;
  };
  return simpson(integrand, mu - 14.0 * sd, mu + 14.0 * sd, 40000);
}

}  // namespace oracle
