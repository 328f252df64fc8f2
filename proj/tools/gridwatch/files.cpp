// SPDX-License-Identifier: Apache-2.0
#include "gridwatch/cli/app.hpp"

#include "gridwatch/error.hpp"
#include "gridwatch/model/system.hpp"
#include "gridwatch/synth/csv.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>

#ifndef GRIDWATCH_DATA_DIR
#define GRIDWATCH_DATA_DIR "data"
#endif

namespace gridwatch::cli {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

std::string real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

fs::path resolve_feeder(const std::string& name_or_path) {
  if (fs::exists(name_or_path)) return name_or_path;
  const fs::path bundled = fs::path(GRIDWATCH_DATA_DIR) / "feeders" / (name_or_path + ".feeder");
  if (fs::exists(bundled)) return bundled;
  throw DataError("no feeder file or bundled feeder named '" + name_or_path + "'");
}

Manifest read_manifest(const fs::path& dir) {
  const auto path = dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    Manifest m;
    m.scenario = j.value("scenario", std::string());
    m.feeder = j.at("feeder").get<std::string>();
    m.sensors = j.at("sensors").get<std::vector<BusId>>();
    m.seed = j.value("seed", std::uint64_t{0});
    for (const auto& [bus, file] : j.at("streams").items()) m.streams[std::stoi(bus)] = file;
    if (j.contains("uplink")) {
      for (const auto& [bus, file] : j.at("uplink").items()) m.uplink[std::stoi(bus)] = file;
    }
    m.groundtruth = j.value("groundtruth", m.groundtruth);
    return m;
  } catch (const std::exception& e) {
    throw DataError("malformed " + path.string() + ": " + e.what());
  }
}

Manifest write_simulation(const synth::Scenario& scenario, const synth::SimulationResult& sim,
                          const fs::path& dir) {
  fs::create_directories(dir);
  Manifest m;
  m.scenario = scenario.name;
  m.feeder = fs::absolute(scenario.feeder_path);
  m.seed = scenario.seed;
  for (const auto& [bus, frames] : sim.streams) {
    m.sensors.push_back(bus);
    m.streams[bus] = "sensor_" + std::to_string(bus) + ".csv";
    synth::write_stream_csv(dir / m.streams[bus], frames);
  }
  for (const auto& [bus, frames] : sim.uplink) {
    m.uplink[bus] = "sensor_" + std::to_string(bus) + "_uplink.csv";
    synth::write_stream_csv(dir / m.uplink[bus], frames);
  }
  open_out(dir / m.groundtruth) << synth::to_json(sim.truth).dump(2) << '\n';

  nlohmann::json j;
  j["scenario"] = m.scenario;
  j["feeder"] = m.feeder.string();
  j["sensors"] = m.sensors;
  j["seed"] = m.seed;
  j["streams"] = nlohmann::json::object();
  for (const auto& [bus, file] : m.streams) j["streams"][std::to_string(bus)] = file;
  j["uplink"] = nlohmann::json::object();
  for (const auto& [bus, file] : m.uplink) j["uplink"][std::to_string(bus)] = file;
  j["groundtruth"] = m.groundtruth;
  j["samples"] = scenario.samples();
  if (!scenario.note.empty()) j["note"] = scenario.note;
  open_out(dir / "manifest.json") << j.dump(2) << '\n';
  return m;
}

LoadedStreams load_streams(const fs::path& dir, const Manifest& manifest) {
  LoadedStreams s;
  for (const auto& [bus, file] : manifest.streams) {
    auto r = synth::read_stream_csv(dir / file, bus);
    s.skipped_rows += r.skipped_rows;
    s.measured[bus] = std::move(r.frames);
  }
  s.uplink = s.measured;
  for (const auto& [bus, file] : manifest.uplink) {
    auto r = synth::read_stream_csv(dir / file, bus);
    s.skipped_rows += r.skipped_rows;
    s.uplink[bus] = std::move(r.frames);
  }
  return s;
}

void write_central_metric(const fs::path& path, const central::CentralRun& run) {
  auto out = open_out(path);
  out << "k,x,ratio\n";
  for (const auto& [k, x] : run.x) out << k << ',' << real(x) << ',' << real(x / run.baseline) << '\n';
}

void write_eventlog(const fs::path& path, const central::EventLog& log) {
  auto out = open_out(path);
  central::write_jsonl(out, log);
}

namespace {

// Long format keeps one schema for any number of lines.
void write_derived(const fs::path& path, const std::vector<analytics::DerivedSample>& samples) {
  auto out = open_out(path);
  out << "k,quantity,line,phase,value\n";
  static constexpr char kPhase[] = {'a', 'b', 'c'};
  auto vec = [&](SampleIndex k, const char* q, const std::string& line, const Vec3& v) {
    for (int p = 0; p < 3; ++p) out << k << ',' << q << ',' << line << ',' << kPhase[p] << ',' << real(v[p]) << '\n';
  };
  for (const auto& s : samples) {
    vec(s.k, "vmag", "", s.vmag);
    out << s.k << ",beta_hat,,," << real(s.beta_hat) << '\n';
    for (const auto& [id, l] : s.lines) {
      vec(s.k, "imag", id, l.imag);
      vec(s.k, "p", id, l.P);
      vec(s.k, "q", id, l.Q);
      if (l.qss_residual) out << s.k << ",qss_residual," << id << ",," << real(*l.qss_residual) << '\n';
    }
  }
}

}  // namespace

central::PipelineResult analyze_dir(const fs::path& in, const fs::path& out, const Config& config) {
  const auto manifest = read_manifest(in);
  const auto feeder = model::load_feeder(manifest.feeder);
  const auto system = model::build_system(feeder);
  const model::Placement placement(manifest.sensors);
  placement.check_against(system);
  const auto streams = load_streams(in, manifest);
  auto res = central::run_offline(feeder, system, placement, streams.measured, streams.uplink,
                                  config.pipeline, true);
  fs::create_directories(out);
  write_eventlog(out / "eventlog.jsonl", res.log);
  write_central_metric(out / "central_metric.csv", res.central);
  for (const auto& [bus, samples] : res.derived) {
    write_derived(out / ("derived_" + std::to_string(bus) + ".csv"), samples);
  }
  return res;
}

}  // namespace gridwatch::cli
