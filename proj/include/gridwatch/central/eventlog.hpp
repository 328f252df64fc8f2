// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "gridwatch/analytics/report.hpp"
#include "gridwatch/central/central.hpp"

#include <nlohmann/json_fwd.hpp>

#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

namespace gridwatch::central {

struct EventLogEntry {
  /// "sensor-<bus>" for local reports, "central" for change clusters.
  std::string origin;
  int incident = 0;
  std::variant<analytics::AnomalyReport, CentralCluster> body;

  SampleIndex start_k() const;
  /// End used for incident grouping. Open entries extend to +infinity.
  SampleIndex end_k_or_max() const;
};

struct EventLog {
  std::vector<EventLogEntry> entries;

  /// Number of distinct incidents.
  int incident_count() const;
};

/// Merge local reports (any order, any number of sensors) and central
/// clusters into one time-ordered log.
///
/// A Persistent report is dropped when the same sensor later closes the same
/// event (same rule, line and start), so each event appears once. Entries
/// whose [start, end] intervals intersect, directly or through a chain, share
/// an incident id; ids count up from 1 in time order.
EventLog fuse_reports(const std::vector<analytics::AnomalyReport>& local,
                      const std::vector<CentralCluster>& central);

nlohmann::json to_json(const EventLogEntry& entry);
/// One JSON object per line.
void write_jsonl(std::ostream& out, const EventLog& log);
std::string to_jsonl(const EventLog& log);
EventLog read_jsonl(std::istream& in);

nlohmann::json to_json(const CentralCluster& cluster);

}  // namespace gridwatch::central
