// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "gridwatch/types.hpp"

#include <nlohmann/json_fwd.hpp>

#include <optional>
#include <string>
#include <string_view>

namespace gridwatch::analytics {

enum class Rule {
  VoltageMag,
  Overcurrent,
  ActivePower,
  ReactivePower,
  CurrentMag,
  Frequency,
  QssValidity,
};

enum class Label {
  Sag,
  Swell,
  Interruption,
  SustainedInterruption,
  Undervoltage,
  Overvoltage,
  Surge,
  Drop,
  Oscillation,
  Overcurrent,
  Transient,
};

std::string_view to_string(Rule rule);
std::string_view to_string(Label label);
Rule rule_from_string(std::string_view text);
Label label_from_string(std::string_view text);

/// True when `label` belongs to the alphabet of `rule`.
bool label_allowed(Rule rule, Label label);

struct AnomalyReport {
  Rule rule = Rule::VoltageMag;
  Label label = Label::Sag;
  BusId bus = 0;
  std::optional<std::string> line;
  std::string phases;  ///< phases that violated, e.g. "a" or "abc"
  SampleIndex start_k = 0;
  /// Empty while the event is still open (the Persistent marker).
  std::optional<SampleIndex> end_k;
  double severity = 0.0;
  bool out_of_table = false;

  bool persistent() const { return !end_k.has_value(); }
  bool operator==(const AnomalyReport&) const = default;
};

/// ISO-8601 UTC timestamp of sample k, counted from the stream epoch.
std::string iso_time(SampleIndex k);

nlohmann::json to_json(const AnomalyReport& report);
AnomalyReport report_from_json(const nlohmann::json& j);

}  // namespace gridwatch::analytics
