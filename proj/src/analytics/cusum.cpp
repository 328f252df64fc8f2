// SPDX-License-Identifier: Apache-2.0
#include "gridwatch/analytics/cusum.hpp"

#include <algorithm>
#include <cmath>

namespace gridwatch::analytics {

Change cusum_step(DetectorState& s, double x) {
  const auto& p = s.params;
  if (!s.armed()) {
    // Welford: var_hat holds the population variance of the samples so far.
    ++s.seen;
    const double delta = x - s.mean_hat;
    s.mean_hat += delta / static_cast<double>(s.seen);
    const double m2 = s.var_hat * static_cast<double>(s.seen - 1) + delta * (x - s.mean_hat);
    s.var_hat = m2 / static_cast<double>(s.seen);
    return Change::None;
  }
  ++s.seen;

  const double var = std::max(s.var_hat, p.var_floor);
  const double z = (x - s.mean_hat) / std::sqrt(var);
  s.last_z = z;
  s.g_plus = std::max(0.0, s.g_plus + p.nu * (z - 0.5 * p.nu));
  s.g_minus = std::max(0.0, s.g_minus + p.nu * (-z - 0.5 * p.nu));

  if (s.g_plus > p.h || s.g_minus > p.h) {
    const Change out = s.g_plus >= s.g_minus ? Change::Up : Change::Down;
    // Restart the estimates from this sample; the detector re-arms after a
    // fresh warmup at the new level.
    s.g_plus = 0.0;
    s.g_minus = 0.0;
    s.mean_hat = x;
    s.var_hat = 0.0;
    s.seen = 1;
    return out;
  }

  const double e = x - s.mean_hat;
  s.mean_hat = p.lambda_forget * s.mean_hat + (1.0 - p.lambda_forget) * x;
  s.var_hat = p.lambda_forget * s.var_hat + (1.0 - p.lambda_forget) * e * e;
  return Change::None;
}

}  // namespace gridwatch::analytics
