// SPDX-License-Identifier: Apache-2.0
#include "gridwatch/synth/scenario.hpp"

#include "gridwatch/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace gridwatch::synth {

namespace {

constexpr std::pair<EventKind, std::string_view> kKinds[] = {
    {EventKind::VoltageSag, "voltage_sag"}, {EventKind::SLGFault, "slg_fault"},
    {EventKind::FuseOpen, "fuse_open"},     {EventKind::LoadLoss, "load_loss"},
    {EventKind::LoadStep, "load_step"},     {EventKind::ReplayAttack, "replay_attack"},
};

constexpr double kTwoPi = 6.28318530717958647692;

}  // namespace

std::string_view to_string(EventKind kind) {
  for (const auto& [k, name] : kKinds) {
    if (k == kind) return name;
  }
  return "unknown";
}

EventKind event_kind_from_string(std::string_view text) {
  for (const auto& [k, name] : kKinds) {
    if (name == text) return k;
  }
  throw DataError("unknown event kind '" + std::string(text) + "'");
}

SampleIndex Scenario::samples() const {
  return static_cast<SampleIndex>(std::llround(duration_s * kSampleRateHz));
}

double Scenario::beta_at(SampleIndex k) const {
  double b = 0.0;
  for (const auto& seg : beta_profile) {
    if (seg.start_k <= k) b = seg.beta;
  }
  return b;
}

Scenario parse_scenario(const nlohmann::json& doc, const std::filesystem::path& base_dir) {
  try {
    Scenario sc;
    sc.name = doc.value("name", std::string("scenario"));
    std::filesystem::path feeder = doc.at("feeder").get<std::string>();
    sc.feeder_path = feeder.is_relative() && !base_dir.empty() ? base_dir / feeder : feeder;
    sc.duration_s = doc.at("duration_s").get<double>();
    sc.seed = doc.value("seed", std::uint64_t{1});
    sc.noise_sigma = doc.value("noise_sigma", 1e-4);
    sc.source_v = doc.value("source_v", 1.0);
    sc.load_scale = doc.value("load_scale", 1.0);
    sc.replay_window = doc.value("replay_window", 12);
    sc.note = doc.value("note", std::string());
    if (doc.contains("sensors")) sc.sensors = doc.at("sensors").get<std::vector<BusId>>();
    if (doc.contains("beta_profile")) {
      for (const auto& jb : doc.at("beta_profile")) {
        BetaSegment seg;
        seg.start_k = jb.value("start_k", SampleIndex{0});
        if (jb.contains("drift_hz")) {
          seg.beta = kTwoPi * jb.at("drift_hz").get<double>() * kSamplePeriod;
        } else {
          seg.beta = jb.at("beta").get<double>();
        }
        sc.beta_profile.push_back(seg);
      }
      std::stable_sort(sc.beta_profile.begin(), sc.beta_profile.end(),
                       [](const auto& a, const auto& b) { return a.start_k < b.start_k; });
    }
    if (doc.contains("loads")) {
      for (const auto& jl : doc.at("loads")) {
        const BusId bus = jl.at("bus").get<BusId>();
        Vec3c s = Vec3c::Zero();
        const auto& js = jl.at("s");
        for (int p = 0; p < 3; ++p) {
          const auto& pq = js.at(static_cast<std::size_t>(p));
          s(p) = Complex(pq.at(0).get<double>(), pq.at(1).get<double>());
        }
        auto [it, fresh] = sc.loads.emplace(bus, s);
        if (!fresh) it->second += s;
      }
    }
    if (doc.contains("events")) {
      for (const auto& je : doc.at("events")) {
        Event e;
        e.kind = event_kind_from_string(je.at("kind").get<std::string>());
        if (je.contains("bus")) e.bus = je.at("bus").get<BusId>();
        if (je.contains("line")) e.line = je.at("line").get<std::string>();
        if (je.contains("phases")) {
          e.phases = model::PhaseMask::parse(je.at("phases").get<std::string>());
          e.phases_given = true;
        }
        e.start_k = je.at("start_k").get<SampleIndex>();
        e.end_k = je.at("end_k").get<SampleIndex>();
        e.magnitude = je.value("magnitude", 0.0);
        sc.events.push_back(std::move(e));
      }
    }
    return sc;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("scenario parse error: ") + e.what());
  }
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open scenario file " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return parse_scenario(doc, path.parent_path());
}

void validate_scenario(const Scenario& sc, const model::FeederModel& feeder) {
  if (!(sc.duration_s > 0.0)) throw ValidationError("scenario duration must be positive");
  if (sc.noise_sigma < 0.0) throw ValidationError("noise_sigma must be non-negative");
  if (sc.replay_window < 1) throw ValidationError("replay_window must be at least 1");
  for (const auto& [bus, s] : sc.loads) {
    if (!feeder.has_bus(bus)) throw ValidationError("load on unknown bus " + std::to_string(bus));
  }
  for (BusId b : sc.sensors) {
    if (!feeder.has_bus(b)) throw ValidationError("sensor on unknown bus " + std::to_string(b));
  }
  SampleIndex prev = 0;
  for (std::size_t i = 0; i < sc.events.size(); ++i) {
    const auto& e = sc.events[i];
    const std::string what = "event " + std::to_string(i) + " (" + std::string(to_string(e.kind)) + ")";
    if (e.start_k < prev) throw ValidationError(what + " is out of time order");
    prev = e.start_k;
    if (!(e.start_k < e.end_k)) throw ValidationError(what + ": start must precede end");
    if (e.bus && !feeder.has_bus(*e.bus)) {
      throw ValidationError(what + " references unknown bus " + std::to_string(*e.bus));
    }
    if (e.line && !feeder.find_line(*e.line)) {
      throw ValidationError(what + " references unknown line " + *e.line);
    }
    switch (e.kind) {
      case EventKind::SLGFault:
        if (!e.phases_given || e.phases.count() != 1) {
          throw ValidationError(what + " needs exactly one faulted phase");
        }
        [[fallthrough]];
      case EventKind::FuseOpen:
        if (!e.line) throw ValidationError(what + " needs a line");
        break;
      case EventKind::LoadLoss:
      case EventKind::LoadStep:
        if (!e.bus) throw ValidationError(what + " needs a bus");
        break;
      case EventKind::ReplayAttack:
        if (!e.bus || std::find(sc.sensors.begin(), sc.sensors.end(), *e.bus) == sc.sensors.end()) {
          throw ValidationError(what + " must target a sensor bus");
        }
        if (e.start_k <= 60) throw ValidationError(what + " must start after the warmup");
        break;
      case EventKind::VoltageSag:
        break;
    }
  }
}

nlohmann::json to_json(const Event& e) {
  nlohmann::json j;
  j["kind"] = to_string(e.kind);
  if (e.bus) j["bus"] = *e.bus;
  if (e.line) j["line"] = *e.line;
  j["phases"] = e.phases.str();
  j["start_k"] = e.start_k;
  j["end_k"] = e.end_k;
  j["magnitude"] = e.magnitude;
  return j;
}

}  // namespace gridwatch::synth
