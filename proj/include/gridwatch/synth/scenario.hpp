// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "gridwatch/model/feeder.hpp"
#include "gridwatch/types.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace gridwatch::synth {

enum class EventKind { VoltageSag, SLGFault, FuseOpen, LoadLoss, LoadStep, ReplayAttack };

std::string_view to_string(EventKind kind);
EventKind event_kind_from_string(std::string_view text);

/// A scripted disturbance over samples [start_k, end_k).
///
/// magnitude by kind: VoltageSag = fractional dip of the source voltage;
/// SLGFault = fault admittance, p.u. (0 picks the default 1e3); FuseOpen
/// unused; LoadLoss = fraction of the bus load lost (0 means all of it);
/// LoadStep = fractional load change (+0.5 = 50% more); ReplayAttack unused.
struct Event {
  EventKind kind = EventKind::LoadLoss;
  std::optional<BusId> bus;
  std::optional<std::string> line;
  model::PhaseMask phases = model::PhaseMask::all();
  bool phases_given = false;
  SampleIndex start_k = 0;
  SampleIndex end_k = 0;
  double magnitude = 0.0;
};

struct BetaSegment {
  SampleIndex start_k = 0;
  double beta = 0.0;  ///< rad/sample
};

struct Scenario {
  std::string name;
  std::filesystem::path feeder_path;
  double duration_s = 10.0;
  /// Bus -> per-phase complex load (consumed), p.u.
  std::map<BusId, Vec3c> loads;
  double load_scale = 1.0;
  double source_v = 1.0;
  std::vector<BetaSegment> beta_profile;
  double noise_sigma = 1e-4;
  std::uint64_t seed = 1;
  std::vector<BusId> sensors;
  std::vector<Event> events;
  /// Frames repeated cyclically by a replay attack.
  int replay_window = 12;
  /// Free-form note carried into the manifest.
  std::string note;

  SampleIndex samples() const;
  double beta_at(SampleIndex k) const;
};

/// Parses the scenario schema. A relative feeder path is resolved against
/// `base_dir`.
Scenario parse_scenario(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
Scenario load_scenario(const std::filesystem::path& path);

/// Throws ValidationError when events are unordered, reference unknown
/// buses or lines, or break a kind-specific rule.
void validate_scenario(const Scenario& sc, const model::FeederModel& feeder);

nlohmann::json to_json(const Event& e);

}  // namespace gridwatch::synth
