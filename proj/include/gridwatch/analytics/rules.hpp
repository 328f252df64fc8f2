// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "gridwatch/analytics/report.hpp"
#include "gridwatch/types.hpp"

#include <array>
#include <optional>
#include <span>

namespace gridwatch::analytics {

struct PowerPair {
  Vec3 P = Vec3::Zero();
  Vec3 Q = Vec3::Zero();
};

/// Per-phase S = v conj(i).
PowerPair complex_power(const Vec3c& v, const Vec3c& i);

/// Phase p is flagged iff imag_p > rating_p. Phases with a non-positive
/// rating (absent phases) are never flagged.
std::array<bool, 3> check_overcurrent(const Vec3& imag, const Vec3& rating);

struct VoltageThresholds {
  double interruption = 0.1;
  double sag = 0.9;
  double swell = 1.1;
  double table_max = 1.8;
  /// Events longer than this become undervoltage / overvoltage / sustained.
  double long_duration_s = 60.0;
};

/// True when a magnitude lies outside the open normal band (sag, swell).
bool voltage_violates(double vmag, const VoltageThresholds& t = {});

struct VoltageClass {
  Label label = Label::Sag;
  double duration_s = 0.0;
  double extreme = 1.0;
  bool out_of_table = false;
};

/// Label an event from its most extreme magnitude and its duration.
VoltageClass classify_voltage(double extreme, double duration_s, const VoltageThresholds& t = {});

/// Label a per-phase magnitude series sampled every `sample_period` seconds.
/// The event spans the first to the last violating sample of any phase.
/// Returns nothing when no sample violates.
std::optional<VoltageClass> classify_voltage(std::span<const Vec3> vmag_series,
                                             double sample_period = kSamplePeriod,
                                             const VoltageThresholds& t = {});

/// Positive-sequence component of a three-phase set.
Complex positive_sequence(const Vec3c& v);

/// Exponentially smoothed per-sample phase advance of the positive sequence.
class FrequencyTracker {
 public:
  explicit FrequencyTracker(double lambda = 0.9) : lambda_(lambda) {}

  /// Returns the current estimate in rad/sample.
  double update(const Vec3c& v);
  double beta_hat() const { return beta_; }
  /// Frequency deviation in Hz.
  double delta_hz() const { return beta_ / (2.0 * 3.14159265358979323846 * kSamplePeriod); }
  /// Set when the last frame had no usable positive sequence.
  bool data_quality_flag() const { return bad_; }

 private:
  double lambda_;
  double beta_ = 0.0;
  bool have_prev_ = false;
  bool have_beta_ = false;
  bool bad_ = false;
  Complex prev_{0.0, 0.0};
};

struct TrendParams {
  /// Minimum |normalized slope| (correlation of the samples with time).
  double s_min = 0.5;
  /// Post/pre variance ratio that marks an oscillation.
  double rho = 4.0;
  /// Samples on each side of the change used for the estimate.
  int window = 24;
};

/// Classify a change from samples before and after it.
///
/// The slope is the least-squares fit over the pre and post samples together,
/// reported as the correlation between sample value and time so it does not
/// depend on the signal's units. |slope| > s_min gives surge or drop. Else a
/// post-change variance above rho times the pre-change variance gives
/// oscillation. Else the sign of the mean shift decides.
Label classify_trend(std::span<const double> pre, std::span<const double> post,
                     const TrendParams& params = {});

}  // namespace gridwatch::analytics
