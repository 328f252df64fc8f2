// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

namespace gridwatch::analytics {

struct DetectorParams {
  double lambda_forget = 0.99;
  double nu = 0.5;
  double h = 5.0;
  std::int64_t warmup = 60;
  double var_floor = 1e-12;
};

enum class Change { None, Up, Down };

/// Two-sided CUSUM over a standardized innovation, with the mean and variance
/// tracked by an exponential window.
///
/// The first `warmup` samples only seed the mean and variance (plain running
/// estimates). After that each sample is standardized against the estimates
/// from the samples before it, and the log-likelihood-ratio increments
///   g+ <- max(0, g+ + nu (z - nu/2)),  g- <- max(0, g- + nu (-z - nu/2))
/// are accumulated. nu is the mean shift (in standard deviations) the test is
/// tuned for. A declared change zeroes both sums and restarts the estimates
/// from the current sample, so the next `warmup` samples re-seed them at the
/// new level.
struct DetectorState {
  DetectorParams params;
  double mean_hat = 0.0;
  double var_hat = 0.0;
  double g_plus = 0.0;
  double g_minus = 0.0;
  std::int64_t seen = 0;
  double last_z = 0.0;

  explicit DetectorState(DetectorParams p = {}) : params(p) {}
  bool armed() const { return seen >= params.warmup; }
};

Change cusum_step(DetectorState& state, double x);

}  // namespace gridwatch::analytics
