// SPDX-License-Identifier: Apache-2.0
#include "gridwatch/central/eventlog.hpp"

#include "gridwatch/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>
#include <tuple>

namespace gridwatch::central {

SampleIndex EventLogEntry::start_k() const {
  if (const auto* r = std::get_if<analytics::AnomalyReport>(&body)) return r->start_k;
  return std::get<CentralCluster>(body).start_k;
}

SampleIndex EventLogEntry::end_k_or_max() const {
  std::optional<SampleIndex> end;
  if (const auto* r = std::get_if<analytics::AnomalyReport>(&body)) {
    end = r->end_k;
  } else {
    end = std::get<CentralCluster>(body).end_k;
  }
  return end.value_or(std::numeric_limits<SampleIndex>::max());
}

int EventLog::incident_count() const {
  std::set<int> ids;
  for (const auto& e : entries) ids.insert(e.incident);
  return static_cast<int>(ids.size());
}

namespace {

// Total order on entries so the log does not depend on arrival order.
auto sort_key(const EventLogEntry& e) {
  std::string rule, line, label, phases;
  BusId bus = 0;
  SampleIndex end = e.end_k_or_max();
  if (const auto* r = std::get_if<analytics::AnomalyReport>(&e.body)) {
    rule = std::string(analytics::to_string(r->rule));
    line = r->line.value_or("");
    label = std::string(analytics::to_string(r->label));
    phases = r->phases;
    bus = r->bus;
  }
  const bool is_central = e.origin == "central";
  return std::make_tuple(e.start_k(), is_central, bus, rule, line, end, label, phases);
}

}  // namespace

EventLog fuse_reports(const std::vector<analytics::AnomalyReport>& local,
                      const std::vector<CentralCluster>& central) {
  EventLog log;
  // Closed events, to drop the Persistent report they supersede.
  std::set<std::tuple<BusId, int, std::string, SampleIndex>> closed;
  for (const auto& r : local) {
    if (!r.persistent()) closed.emplace(r.bus, static_cast<int>(r.rule), r.line.value_or(""), r.start_k);
  }
  std::set<std::tuple<BusId, int, std::string, SampleIndex>> seen_open;
  for (const auto& r : local) {
    const auto key = std::make_tuple(r.bus, static_cast<int>(r.rule), r.line.value_or(""), r.start_k);
    if (r.persistent()) {
      if (closed.contains(key) || !seen_open.insert(key).second) continue;
    }
    log.entries.push_back({"sensor-" + std::to_string(r.bus), 0, r});
  }
  for (const auto& c : central) log.entries.push_back({"central", 0, c});

  std::stable_sort(log.entries.begin(), log.entries.end(),
                   [](const auto& a, const auto& b) { return sort_key(a) < sort_key(b); });

  // Sweep in start order; an entry joins the running incident while it
  // starts no later than the furthest end seen so far.
  int incident = 0;
  SampleIndex reach = std::numeric_limits<SampleIndex>::min();
  for (auto& e : log.entries) {
    if (incident == 0 || e.start_k() > reach) {
      ++incident;
      reach = e.end_k_or_max();
    } else {
      reach = std::max(reach, e.end_k_or_max());
    }
    e.incident = incident;
  }
  return log;
}

nlohmann::json to_json(const CentralCluster& c) {
  nlohmann::json j;
  j["start_k"] = c.start_k;
  j["end_k"] = c.end_k ? nlohmann::json(*c.end_k) : nlohmann::json(nullptr);
  j["changes"] = c.changes;
  j["peak_ratio"] = c.peak_ratio;
  j["start_time"] = analytics::iso_time(c.start_k);
  j["end_time"] = c.end_k ? nlohmann::json(analytics::iso_time(*c.end_k)) : nlohmann::json(nullptr);
  return j;
}

nlohmann::json to_json(const EventLogEntry& e) {
  nlohmann::json j;
  j["incident"] = e.incident;
  j["origin"] = e.origin;
  if (const auto* r = std::get_if<analytics::AnomalyReport>(&e.body)) {
    j["kind"] = "report";
    j["report"] = analytics::to_json(*r);
  } else {
    j["kind"] = "central_change";
    j["cluster"] = to_json(std::get<CentralCluster>(e.body));
  }
  return j;
}

void write_jsonl(std::ostream& out, const EventLog& log) {
  for (const auto& e : log.entries) out << to_json(e).dump() << '\n';
}

std::string to_jsonl(const EventLog& log) {
  std::ostringstream os;
  write_jsonl(os, log);
  return os.str();
}

EventLog read_jsonl(std::istream& in) {
  EventLog log;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      EventLogEntry e;
      e.incident = j.at("incident").get<int>();
      e.origin = j.at("origin").get<std::string>();
      if (j.at("kind") == "report") {
        e.body = analytics::report_from_json(j.at("report"));
      } else {
        const auto& c = j.at("cluster");
        CentralCluster cc;
        cc.start_k = c.at("start_k").get<SampleIndex>();
        if (!c.at("end_k").is_null()) cc.end_k = c.at("end_k").get<SampleIndex>();
        cc.changes = c.at("changes").get<std::int64_t>();
        cc.peak_ratio = c.at("peak_ratio").get<double>();
        e.body = cc;
      }
      log.entries.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw DataError("event log line " + std::to_string(lineno) + ": " + ex.what());
    }
  }
  return log;
}

}  // namespace gridwatch::central
