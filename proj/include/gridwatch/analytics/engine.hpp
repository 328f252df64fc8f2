// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "gridwatch/analytics/cusum.hpp"
#include "gridwatch/analytics/qss.hpp"
#include "gridwatch/analytics/report.hpp"
#include "gridwatch/analytics/rules.hpp"
#include "gridwatch/analytics/segment.hpp"
#include "gridwatch/types.hpp"

#include <deque>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace gridwatch::analytics {

/// One timestamp at one sensor bus. Per-unit.
struct PhasorFrame {
  SampleIndex k = 0;
  BusId bus = 0;
  Vec3c v = Vec3c::Zero();
  /// Line id -> current phasor flowing out of the bus into that line.
  std::map<std::string, Vec3c> i_lines;

  bool operator==(const PhasorFrame&) const = default;
};

/// Throws DataError when any entry is not finite.
void check_frame(const PhasorFrame& frame);

struct LineDerived {
  Vec3 imag = Vec3::Zero();
  Vec3 P = Vec3::Zero();
  Vec3 Q = Vec3::Zero();
  /// Empty until the line's window has filled.
  std::optional<double> qss_residual;
};

struct DerivedSample {
  SampleIndex k = 0;
  Vec3 vmag = Vec3::Zero();
  double beta_hat = 0.0;
  std::map<std::string, LineDerived> lines;
};

struct LocalConfig {
  DetectorParams detector;
  SegmentParams segment;
  int window_m = 12;
  VoltageThresholds voltage;
  TrendParams trend;
  double freq_lambda = 0.9;
  /// Line id -> per-phase rated current, p.u. Lines not listed are not
  /// checked for overcurrent.
  std::map<std::string, Vec3> ratings;
};

/// The per-sensor rule engine. Grid-agnostic: it sees only its own stream
/// and the ratings of its incident lines.
class LocalEngine {
 public:
  LocalEngine(BusId bus, LocalConfig config);
  ~LocalEngine();
  LocalEngine(LocalEngine&&) noexcept;
  LocalEngine& operator=(LocalEngine&&) noexcept;

  /// Process one frame; returns the reports completed by it.
  std::vector<AnomalyReport> push(const PhasorFrame& frame, DerivedSample* derived = nullptr);
  /// Close every open event (end of stream).
  std::vector<AnomalyReport> finish();

  BusId bus() const { return bus_; }
  /// Frames whose positive sequence was unusable for frequency tracking.
  std::int64_t data_quality_count() const;

 private:
  struct Impl;
  BusId bus_;
  std::unique_ptr<Impl> impl_;
};

/// Convenience: run a whole stream through a fresh engine.
std::vector<AnomalyReport> run_local(BusId bus, const LocalConfig& config,
                                     const std::vector<PhasorFrame>& frames,
                                     std::vector<DerivedSample>* derived = nullptr);

}  // namespace gridwatch::analytics
