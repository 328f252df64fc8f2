// SPDX-License-Identifier: Apache-2.0
#include "gridwatch/analytics/report.hpp"

#include "gridwatch/error.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdio>
#include <ctime>
#include <utility>

namespace gridwatch::analytics {

namespace {

constexpr std::array<std::pair<Rule, std::string_view>, 7> kRules{{
    {Rule::VoltageMag, "voltage_mag"},
    {Rule::Overcurrent, "overcurrent"},
    {Rule::ActivePower, "active_power"},
    {Rule::ReactivePower, "reactive_power"},
    {Rule::CurrentMag, "current_mag"},
    {Rule::Frequency, "frequency"},
    {Rule::QssValidity, "qss_validity"},
}};

constexpr std::array<std::pair<Label, std::string_view>, 11> kLabels{{
    {Label::Sag, "sag"},
    {Label::Swell, "swell"},
    {Label::Interruption, "interruption"},
    {Label::SustainedInterruption, "sustained_interruption"},
    {Label::Undervoltage, "undervoltage"},
    {Label::Overvoltage, "overvoltage"},
    {Label::Surge, "surge"},
    {Label::Drop, "drop"},
    {Label::Oscillation, "oscillation"},
    {Label::Overcurrent, "overcurrent"},
    {Label::Transient, "transient"},
}};

// 2020-01-01T00:00:00Z
constexpr std::time_t kStreamEpoch = 1577836800;

}  // namespace

std::string_view to_string(Rule rule) {
  for (const auto& [r, name] : kRules) {
    if (r == rule) return name;
  }
  return "unknown";
}

std::string_view to_string(Label label) {
  for (const auto& [l, name] : kLabels) {
    if (l == label) return name;
  }
  return "unknown";
}

Rule rule_from_string(std::string_view text) {
  for (const auto& [r, name] : kRules) {
    if (name == text) return r;
  }
  throw DataError("unknown rule '" + std::string(text) + "'");
}

Label label_from_string(std::string_view text) {
  for (const auto& [l, name] : kLabels) {
    if (name == text) return l;
  }
  throw DataError("unknown label '" + std::string(text) + "'");
}

bool label_allowed(Rule rule, Label label) {
  switch (rule) {
    case Rule::VoltageMag:
      return label == Label::Sag || label == Label::Swell || label == Label::Interruption ||
             label == Label::SustainedInterruption || label == Label::Undervoltage ||
             label == Label::Overvoltage;
    case Rule::Overcurrent:
      return label == Label::Overcurrent;
    case Rule::ActivePower:
    case Rule::ReactivePower:
    case Rule::CurrentMag:
    case Rule::Frequency:
      return label == Label::Surge || label == Label::Drop || label == Label::Oscillation;
    case Rule::QssValidity:
      return label == Label::Transient;
  }
  return false;
}

std::string iso_time(SampleIndex k) {
  // k / 120 s, split into whole seconds and microseconds without rounding drift.
  const std::int64_t micros = k * 25000 / 3;
  std::int64_t secs = micros / 1000000;
  std::int64_t frac = micros % 1000000;
  if (frac < 0) {
    frac += 1000000;
    --secs;
  }
  const std::time_t t = kStreamEpoch + static_cast<std::time_t>(secs);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%06lldZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec,
                static_cast<long long>(frac));
  return buf;
}

nlohmann::json to_json(const AnomalyReport& r) {
  nlohmann::json j;
  j["rule"] = to_string(r.rule);
  j["label"] = to_string(r.label);
  j["bus"] = r.bus;
  j["line"] = r.line ? nlohmann::json(*r.line) : nlohmann::json(nullptr);
  j["phases"] = r.phases;
  j["start_k"] = r.start_k;
  j["end_k"] = r.end_k ? nlohmann::json(*r.end_k) : nlohmann::json(nullptr);
  j["persistent"] = r.persistent();
  j["severity"] = r.severity;
  j["out_of_table"] = r.out_of_table;
  j["start_time"] = iso_time(r.start_k);
  j["end_time"] = r.end_k ? nlohmann::json(iso_time(*r.end_k)) : nlohmann::json(nullptr);
  return j;
}

AnomalyReport report_from_json(const nlohmann::json& j) {
  try {
    AnomalyReport r;
    r.rule = rule_from_string(j.at("rule").get<std::string>());
    r.label = label_from_string(j.at("label").get<std::string>());
    r.bus = j.at("bus").get<BusId>();
    if (!j.at("line").is_null()) r.line = j.at("line").get<std::string>();
    r.phases = j.value("phases", std::string());
    r.start_k = j.at("start_k").get<SampleIndex>();
    if (!j.at("end_k").is_null()) r.end_k = j.at("end_k").get<SampleIndex>();
    r.severity = j.at("severity").get<double>();
    r.out_of_table = j.value("out_of_table", false);
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
}

}  // namespace gridwatch::analytics
