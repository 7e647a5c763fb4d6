#pragma once

#include <cmath>
#include <functional>

namespace oracle {

// Accept/reject rule of a plain random-walk Metropolis step, written from
// the definition: accept with probability min(1, pi(y) / pi(x)).
inline bool metropolis_accepts(double log_pi_x, double log_pi_y, double log_u) {
  if (std::isinf(log_pi_y) && log_pi_y < 0) return false;
  const double ratio = std::exp(log_pi_y - log_pi_x);
  return std::exp(log_u) < std::min(1.0, ratio);
}

}  // namespace oracle
