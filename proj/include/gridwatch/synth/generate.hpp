// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "gridwatch/analytics/engine.hpp"
#include "gridwatch/model/feeder.hpp"
#include "gridwatch/synth/scenario.hpp"

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include <map>
#include <set>
#include <string>
#include <vector>

namespace gridwatch::synth {

/// The electrical configuration in force over one interval.
struct NetworkState {
  double source_scale = 1.0;
  /// Consumed complex power per bus and phase, p.u.
  std::map<BusId, Vec3c> loads;
  /// (bus, phase) -> shunt admittance to ground, p.u.
  std::map<std::pair<BusId, int>, Complex> fault_shunts;
  /// (line id, phase) with the series path removed.
  std::set<std::pair<std::string, int>> open_phases;

  bool operator==(const NetworkState&) const = default;
};

/// Bus voltages and net current injections (sum of the currents leaving the
/// bus through its lines), p.u., bus-major then phase.
struct NetworkSolution {
  std::vector<BusId> bus_ids;
  Eigen::VectorXcd V;
  Eigen::VectorXcd I;
  int iterations = 0;
};

/// Loads whose phase voltage falls below this magnitude behave as constant
/// impedance instead of constant power.
inline constexpr double kConstantZBelow = 0.7;

/// Fixed-point load flow from a flat start. Throws DataError when it does not
/// reach 1e-10 within 200 iterations.
NetworkSolution solve_network(const model::FeederModel& feeder, const NetworkState& state,
                              double source_v);

/// Current leaving `bus` through `line` for the given bus voltages.
Vec3c line_current(const model::FeederModel& feeder, const model::LineSegment& line, BusId bus,
                   const NetworkState& state, const Eigen::VectorXcd& V);

/// State in force at sample k (events active on [start_k, end_k)).
NetworkState state_at(const Scenario& sc, const model::FeederModel& feeder, SampleIndex k);

struct GroundTruthEntry {
  Event event;
  std::vector<BusId> affected_buses;
  std::vector<std::string> affected_lines;
  std::vector<std::string> expected_rules;
};

struct GroundTruth {
  std::string scenario;
  std::vector<GroundTruthEntry> events;
};

nlohmann::json to_json(const GroundTruth& gt);
GroundTruth ground_truth_from_json(const nlohmann::json& j);

using Streams = std::map<BusId, std::vector<analytics::PhasorFrame>>;

struct SimulationResult {
  /// What each sensor measures.
  Streams streams;
  /// What reaches the central engine for sensors whose uplink is tampered.
  Streams uplink;
  GroundTruth truth;
};

/// Generate the sensors' streams. `sensors` overrides the scenario's list
/// when non-empty.
SimulationResult generate(const Scenario& sc, const model::FeederModel& feeder,
                          const std::vector<BusId>& sensors = {});

/// Replace the frames with k in [start, end] by a cyclic repetition of the
/// `window` frames just before `start`. The k of each frame is kept.
std::vector<analytics::PhasorFrame> apply_replay_attack(
    const std::vector<analytics::PhasorFrame>& stream, SampleIndex start, SampleIndex end,
    int window = 12);

/// Same, on one sensor of a stream set; other sensors are untouched.
Streams apply_replay_attack(const Streams& streams, BusId sensor, SampleIndex start,
                            SampleIndex end, int window = 12);

/// Streams the central engine should see: uplink where tampered, else the
/// measured stream.
Streams central_view(const SimulationResult& sim);

}  // namespace gridwatch::synth
