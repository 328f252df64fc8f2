// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "gridwatch/types.hpp"

#include <nlohmann/json_fwd.hpp>

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace gridwatch::model {

/// Which of the phases a, b, c are physically present.
struct PhaseMask {
  std::array<bool, 3> present{false, false, false};

  static PhaseMask all();
  /// Parses "abc", "a", "ac", ... Throws DataError on anything else.
  static PhaseMask parse(std::string_view text);

  bool has(int phase) const { return present[static_cast<std::size_t>(phase)]; }
  int count() const;
  bool full() const { return count() == 3; }
  bool any() const { return count() > 0; }
  std::string str() const;
  PhaseMask operator|(const PhaseMask& other) const;
  bool operator==(const PhaseMask&) const = default;
};

struct Bus {
  BusId id = 0;
  std::string name;
  double kv_base = 0.0;  ///< line-to-line kV
  bool slack = false;
};

/// Three-phase pi-model line. Admittances are per-unit on the from-bus base,
/// rows and columns of absent phases are exact zeros.
struct LineSegment {
  std::string id;
  BusId from = 0;
  BusId to = 0;
  Mat3c series = Mat3c::Zero();
  Mat3c shunt = Mat3c::Zero();  ///< total line charging, split half per end
  Vec3 rated_current = Vec3::Zero();  ///< per-unit, zero on absent phases
  PhaseMask phases;
  std::string kind = "line";
};

/// Validated, immutable feeder description. All electrical quantities are
/// per-unit on the declared bases.
class FeederModel {
 public:
  FeederModel(std::string name, double base_mva, std::vector<Bus> buses,
              std::vector<LineSegment> lines);

  const std::string& name() const { return name_; }
  double base_mva() const { return base_mva_; }
  const std::vector<Bus>& buses() const { return buses_; }
  const std::vector<LineSegment>& lines() const { return lines_; }
  std::size_t bus_count() const { return buses_.size(); }
  BusId slack() const { return slack_; }

  bool has_bus(BusId id) const { return index_.contains(id); }
  /// Position of the bus in bus order; throws std::out_of_range if unknown.
  std::size_t index_of(BusId id) const;
  const Bus& bus(BusId id) const { return buses_[index_of(id)]; }
  const LineSegment* find_line(std::string_view id) const;

  /// Union of the phase masks of all lines touching the bus.
  PhaseMask bus_phases(BusId id) const;
  /// Lines touching the bus, in feeder order.
  std::vector<const LineSegment*> incident_lines(BusId id) const;

  /// Impedance base (ohm) of a bus voltage level.
  double impedance_base(BusId id) const;
  /// Per-phase current base (A) of a bus voltage level.
  double current_base(BusId id) const;
  /// Line-to-neutral voltage base (V) of a bus voltage level.
  double voltage_base(BusId id) const;

 private:
  void validate() const;

  std::string name_;
  double base_mva_ = 1.0;
  std::vector<Bus> buses_;
  std::vector<LineSegment> lines_;
  BusId slack_ = 0;
  std::unordered_map<BusId, std::size_t> index_;
};

/// Parses the JSON feeder schema. Series/shunt admittances in the file are
/// siemens referred to the from-bus voltage level; ratings are amperes.
FeederModel parse_feeder(const nlohmann::json& doc);
FeederModel load_feeder(const std::filesystem::path& path);

struct ReducedFeeder {
  FeederModel feeder;
  /// Attachment bus -> removed lateral subtrees (bus ids of each subtree).
  std::map<BusId, std::vector<std::vector<BusId>>> provenance;
};

/// Keeps only the three-phase backbone reachable from the slack bus.
ReducedFeeder reduce_laterals(const FeederModel& feeder);

}  // namespace gridwatch::model
