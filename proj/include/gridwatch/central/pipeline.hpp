// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "gridwatch/analytics/engine.hpp"
#include "gridwatch/central/central.hpp"
#include "gridwatch/central/eventlog.hpp"
#include "gridwatch/model/feeder.hpp"
#include "gridwatch/model/system.hpp"

#include <map>
#include <vector>

namespace gridwatch::central {

using Streams = std::map<BusId, std::vector<analytics::PhasorFrame>>;

/// Per-phase ratings of the lines incident to a bus, keyed by line id.
std::map<std::string, Vec3> ratings_for(const model::FeederModel& feeder, BusId bus);

struct PipelineConfig {
  analytics::LocalConfig local;  ///< ratings are filled per sensor
  CentralParams central;
};

struct CentralRun {
  CentralModel model;
  double baseline = 1.0;
  std::vector<std::pair<SampleIndex, double>> x;  ///< metric per complete sample
  std::vector<CentralChange> changes;
  std::vector<CentralCluster> clusters;
  std::int64_t gaps = 0;
};

/// Feeds fused samples to a CentralEngine and records what the central side
/// reports. Shared by the in-process and networked pipelines.
class CentralRecorder {
 public:
  CentralRecorder(const model::SystemMatrix& system, const model::Placement& placement,
                  const CentralParams& params);

  void push(const FusedSample& sample);
  /// Closes open clusters and returns the finished run.
  CentralRun finish();

 private:
  CentralRun run_;
  CentralEngine engine_;
};

/// Central side only: fuse the streams by k and run the change detector.
/// Sensors missing a k make that sample incomplete.
CentralRun run_central(const model::SystemMatrix& system, const model::Placement& placement,
                       const Streams& central_streams, const CentralParams& params);

/// Central detector baseline: the placement objective, or 1 when it is 0.
double central_baseline(const model::SystemMatrix& system, const model::Placement& placement);

struct PipelineResult {
  EventLog log;
  CentralRun central;
  std::map<BusId, std::vector<analytics::AnomalyReport>> local;
  std::map<BusId, std::vector<analytics::DerivedSample>> derived;
};

/// The whole hierarchy without networking. `measured` feeds the local
/// engines, `uplink` (what arrives at the central engine) feeds the central
/// engine; pass the same streams twice when nothing is tampered.
PipelineResult run_offline(const model::FeederModel& feeder, const model::SystemMatrix& system,
                           const model::Placement& placement, const Streams& measured,
                           const Streams& uplink, const PipelineConfig& config,
                           bool keep_derived = false);

}  // namespace gridwatch::central
