// SPDX-License-Identifier: Apache-2.0
#include "gridwatch/cli/app.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <limits>
#include <sstream>

namespace gridwatch::cli {

Score score(const central::EventLog& log, const synth::GroundTruth& truth, SampleIndex tolerance) {
  // Incident id -> [first start, last end].
  std::map<int, std::pair<SampleIndex, SampleIndex>> spans;
  for (const auto& e : log.entries) {
    auto [it, fresh] = spans.try_emplace(e.incident, e.start_k(), e.end_k_or_max());
    if (!fresh) {
      it->second.first = std::min(it->second.first, e.start_k());
      it->second.second = std::max(it->second.second, e.end_k_or_max());
    }
  }
  Score s;
  s.incidents = static_cast<int>(spans.size());
  std::map<int, bool> matched;
  for (const auto& g : truth.events) {
    Score::EventMatch m;
    m.kind = std::string(synth::to_string(g.event.kind));
    m.start_k = g.event.start_k;
    m.end_k = g.event.end_k;
    m.detectable = g.event.kind != synth::EventKind::ReplayAttack;
    const SampleIndex lo = g.event.start_k - tolerance;
    const SampleIndex hi = g.event.end_k + tolerance;
    for (const auto& [id, span] : spans) {
      if (span.first <= hi && span.second >= lo) {
        m.incidents.push_back(id);
        matched[id] = true;
      }
    }
    if (m.detectable) (m.incidents.empty() ? s.misses : s.hits)++;
    s.events.push_back(std::move(m));
  }
  for (const auto& [id, span] : spans) {
    if (!matched.count(id)) ++s.false_alarms;
  }
  return s;
}

nlohmann::json to_json(const Score& s) {
  nlohmann::json j;
  j["hits"] = s.hits;
  j["misses"] = s.misses;
  j["false_alarms"] = s.false_alarms;
  j["incidents"] = s.incidents;
  j["events"] = nlohmann::json::array();
  for (const auto& e : s.events) {
    j["events"].push_back({{"kind", e.kind},
                           {"start_k", e.start_k},
                           {"end_k", e.end_k},
                           {"detectable", e.detectable},
                           {"incidents", e.incidents}});
  }
  return j;
}

std::string score_table(const Score& s) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-14s %8s %8s  %s\n", "event", "start_k", "end_k", "incidents");
  out << line;
  for (const auto& e : s.events) {
    std::string ids;
    for (const int id : e.incidents) ids += (ids.empty() ? "" : ",") + std::to_string(id);
    if (ids.empty()) ids = e.detectable ? "MISSED" : "-";
    std::snprintf(line, sizeof line, "%-14s %8lld %8lld  %s\n", e.kind.c_str(),
                  static_cast<long long>(e.start_k), static_cast<long long>(e.end_k), ids.c_str());
    out << line;
  }
  out << "\nhits " << s.hits << "  misses " << s.misses << "  false alarms " << s.false_alarms
      << "  incidents " << s.incidents << '\n';
  return out.str();
}

}  // namespace gridwatch::cli
