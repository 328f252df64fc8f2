// SPDX-License-Identifier: Apache-2.0
#include "gridwatch/cli/app.hpp"

#include "gridwatch/error.hpp"
#include "gridwatch/model/system.hpp"
#include "gridwatch/placement/placement.hpp"
#include "gridwatch/synth/csv.hpp"
#include "gridwatch/synth/scenario.hpp"
#include "gridwatch/transport/net.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>

#ifndef GRIDWATCH_DATA_DIR
#define GRIDWATCH_DATA_DIR "data"
#endif

namespace gridwatch::cli {

namespace fs = std::filesystem;

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop.store(true); }

void install_signal_handlers() {
  g_stop.store(false);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
}

fs::path resolve_scenario(const std::string& name_or_path) {
  if (fs::exists(name_or_path)) return name_or_path;
  const fs::path bundled = fs::path(GRIDWATCH_DATA_DIR) / "scenarios" / (name_or_path + ".json");
  if (fs::exists(bundled)) return bundled;
  throw DataError("no scenario file or bundled scenario named '" + name_or_path + "'");
}

struct ConfigArgs {
  std::string file;
  std::vector<std::string> overrides;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", file, "INI config file")->check(CLI::ExistingFile);
    cmd->add_option("--set", overrides, "Override one key, section.key=value (repeatable)");
  }

  Config load() const {
    Config c = file.empty() ? Config{} : load_config(file);
    apply_overrides(c, overrides);
    return c;
  }
};

// "host:port" or ":port" or "host".
void parse_endpoint(const std::string& text, Config& c) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos) {
    c.host = text;
    return;
  }
  if (colon > 0) c.host = text.substr(0, colon);
  apply_overrides(c, {"network.port=" + text.substr(colon + 1)});
}

std::string join(const std::vector<BusId>& buses) {
  std::string s;
  for (const BusId b : buses) s += (s.empty() ? "" : ",") + std::to_string(b);
  return s;
}

// ---------------------------------------------------------------- place

struct PlaceArgs {
  std::string feeder = "ieee34";
  int k = 3;
  std::vector<std::string> solvers{"greedy", "exhaustive", "random"};
  std::uint64_t seed = 1;
  std::string candidates = "all";
  bool reduce = false;
  int threads = 1;
  bool json = false;
};

int cmd_place(const PlaceArgs& a, std::ostream& out) {
  auto feeder = model::load_feeder(resolve_feeder(a.feeder));
  if (a.reduce) feeder = model::reduce_laterals(feeder).feeder;
  const auto system = model::build_system(feeder);
  placement::SolveOptions opt;
  if (a.candidates == "three-phase") {
    opt.candidates = placement::candidate_buses(feeder, true);
  } else if (a.candidates != "all") {
    throw ConfigError("--candidates must be three-phase or all");
  }
  opt.threads = a.threads;
  if (a.k < 1) throw ConfigError("--k must be >= 1");

  std::vector<placement::PlacementResult> results;
  for (const auto& name : a.solvers) {
    switch (placement::solver_from_string(name)) {
      case placement::Solver::Greedy: results.push_back(placement::greedy_place(system, a.k, opt)); break;
      case placement::Solver::Exhaustive:
        results.push_back(placement::exhaustive_place(system, a.k, opt));
        break;
      case placement::Solver::Random:
        results.push_back(placement::random_place(system, a.k, a.seed, opt));
        break;
    }
  }
  if (a.json) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : results) j.push_back(placement::to_json(r));
    out << j.dump(2) << '\n';
    return kOk;
  }
  const std::size_t n_cand = opt.candidates.empty() ? feeder.buses().size() : opt.candidates.size();
  out << "feeder " << feeder.name() << (a.reduce ? " (laterals reduced)" : "") << ", "
      << feeder.buses().size() << " buses, " << n_cand << " candidates, K = " << a.k << "\n\n";
  char line[200];
  std::snprintf(line, sizeof line, "%-11s %-18s %14s %12s %10s\n", "solver", "sensors",
                "lambda_max", "evaluations", "time_s");
  out << line;
  for (const auto& r : results) {
    std::snprintf(line, sizeof line, "%-11s %-18s %14.6e %12lld %10.4f\n",
                  std::string(placement::to_string(r.solver)).c_str(), join(r.placement.buses()).c_str(),
                  r.objective, static_cast<long long>(r.evaluations), r.elapsed_s);
    out << line;
  }
  return kOk;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string scenario;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::vector<BusId> sensors;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  auto sc = synth::load_scenario(resolve_scenario(a.scenario));
  if (a.seed) sc.seed = *a.seed;
  const auto feeder = model::load_feeder(sc.feeder_path);
  const auto sim = synth::generate(sc, feeder, a.sensors);
  const auto m = write_simulation(sc, sim, a.out);
  out << "scenario " << m.scenario << ": " << sc.samples() << " samples at sensors " << join(m.sensors)
      << ", " << sim.truth.events.size() << " events";
  if (!m.uplink.empty()) out << ", " << m.uplink.size() << " tampered uplink(s)";
  out << "\nwrote " << a.out << '\n';
  return kOk;
}

// ---------------------------------------------------------------- analyze

int cmd_analyze(const std::string& in, const std::string& out_dir, const ConfigArgs& cfg, std::ostream& out) {
  const auto res = analyze_dir(in, out_dir, cfg.load());
  std::size_t reports = 0;
  for (const auto& [bus, r] : res.local) reports += r.size();
  out << reports << " local reports, " << res.central.clusters.size() << " central clusters, "
      << res.log.incident_count() << " incidents\nwrote " << out_dir << '\n';
  return kOk;
}

// ---------------------------------------------------------------- report

int cmd_report(const std::string& eventlog, const std::string& truth_path, SampleIndex tolerance, bool json,
               std::ostream& out) {
  std::ifstream log_in(eventlog);
  if (!log_in) throw DataError("cannot read " + eventlog);
  const auto log = central::read_jsonl(log_in);
  std::ifstream truth_in(truth_path);
  if (!truth_in) throw DataError("cannot read " + truth_path);
  nlohmann::json tj;
  try {
    tj = nlohmann::json::parse(truth_in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(truth_path + ": " + e.what());
  }
  const auto s = score(log, synth::ground_truth_from_json(tj), tolerance);
  if (json) {
    out << to_json(s).dump(2) << '\n';
  } else {
    out << score_table(s);
  }
  return kOk;
}

// ---------------------------------------------------------------- serve-local

struct LocalArgs {
  std::string in;
  std::string stream;
  std::string uplink;
  std::string feeder;
  BusId bus = 0;
  double rate = 1.0;
  std::string spool;
  std::string connect;
  std::string wire;
};

int cmd_serve_local(const LocalArgs& a, const ConfigArgs& cfg_args, std::ostream& out) {
  Config cfg = cfg_args.load();
  if (!a.connect.empty()) parse_endpoint(a.connect, cfg);
  if (!a.wire.empty()) cfg.wire = transport::wire_from_string(a.wire);

  fs::path stream_path = a.stream;
  fs::path uplink_path = a.uplink;
  fs::path feeder_path;
  if (!a.in.empty()) {
    const auto m = read_manifest(a.in);
    const auto it = m.streams.find(a.bus);
    if (it == m.streams.end()) throw DataError("no stream for bus " + std::to_string(a.bus) + " in " + a.in);
    stream_path = fs::path(a.in) / it->second;
    if (const auto u = m.uplink.find(a.bus); u != m.uplink.end()) uplink_path = fs::path(a.in) / u->second;
    feeder_path = m.feeder;
  } else {
    if (stream_path.empty() || a.feeder.empty()) throw ConfigError("give --in, or --stream with --feeder");
    feeder_path = resolve_feeder(a.feeder);
  }
  const auto feeder = model::load_feeder(feeder_path);
  auto local = cfg.pipeline.local;
  local.ratings = central::ratings_for(feeder, a.bus);

  const auto measured = synth::read_stream_csv(stream_path, a.bus);
  std::optional<synth::CsvReadResult> tampered;
  if (!uplink_path.empty()) tampered = synth::read_stream_csv(uplink_path, a.bus);

  transport::LocalNodeOptions opt;
  opt.host = cfg.host;
  opt.port = cfg.port;
  opt.wire = cfg.wire;
  opt.rate = a.rate;
  opt.heartbeat_s = cfg.heartbeat_s;
  opt.reconnect_s = cfg.reconnect_s;
  opt.give_up_s = cfg.give_up_s;
  if (!a.spool.empty()) {
    opt.spool = a.spool;
  } else if (!cfg.spool_dir.empty()) {
    fs::create_directories(cfg.spool_dir);
    opt.spool = cfg.spool_dir / ("sensor_" + std::to_string(a.bus) + ".spool");
  }
  install_signal_handlers();
  opt.stop = &g_stop;
  const auto r = transport::serve_local(a.bus, local, measured.frames, tampered ? &tampered->frames : nullptr, opt);
  out << "sensor " << a.bus << ": " << r.reports.size() << " reports, " << r.frames_sent << " frames sent, "
      << r.connections << " connection(s)";
  if (measured.skipped_rows > 0) out << ", " << measured.skipped_rows << " malformed rows skipped";
  out << '\n';
  return g_stop.load() ? kNetwork : kOk;
}

// ---------------------------------------------------------------- serve-central

struct CentralArgs {
  std::string in;
  std::string feeder;
  std::vector<BusId> sensors;
  std::string bind;
  std::optional<int> port;
  std::string out;
  std::string wire;
};

int cmd_serve_central(const CentralArgs& a, const ConfigArgs& cfg_args, std::ostream& out) {
  Config cfg = cfg_args.load();
  if (a.port) apply_overrides(cfg, {"network.port=" + std::to_string(*a.port)});
  if (!a.wire.empty()) cfg.wire = transport::wire_from_string(a.wire);
  fs::path feeder_path;
  std::vector<BusId> sensors = a.sensors;
  if (!a.in.empty()) {
    const auto m = read_manifest(a.in);
    feeder_path = m.feeder;
    if (sensors.empty()) sensors = m.sensors;
  } else {
    if (a.feeder.empty() || sensors.empty()) throw ConfigError("give --in, or --feeder with --sensors");
    feeder_path = resolve_feeder(a.feeder);
  }
  const auto feeder = model::load_feeder(feeder_path);
  const auto system = model::build_system(feeder);
  const model::Placement placement(sensors);
  placement.check_against(system);

  transport::CentralNodeOptions opt;
  opt.bind = a.bind.empty() ? cfg.host : a.bind;
  opt.port = cfg.port;
  opt.wire = cfg.wire;
  opt.align = cfg.align;
  opt.idle_timeout_s = cfg.idle_timeout_s;
  opt.on_listening = [&out](std::uint16_t port) { out << "listening on port " << port << std::endl; };
  install_signal_handlers();
  opt.stop = &g_stop;
  const auto r = transport::serve_central(system, placement, cfg.pipeline.central, opt);

  bool complete = true;
  nlohmann::json sessions = nlohmann::json::object();
  for (const auto& [bus, s] : r.sessions) {
    complete = complete && s.status == transport::Status::Finished;
    sessions[std::to_string(bus)] = {{"last_k", s.last_k ? nlohmann::json(*s.last_k) : nlohmann::json()},
                                     {"gaps", s.gaps},
                                     {"duplicates", s.duplicates},
                                     {"late", s.late},
                                     {"reports", s.reports},
                                     {"finished", s.status == transport::Status::Finished}};
  }
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    write_eventlog(fs::path(a.out) / "eventlog.jsonl", r.log);
    write_central_metric(fs::path(a.out) / "central_metric.csv", r.central);
    std::ofstream(fs::path(a.out) / "sessions.json") << sessions.dump(2) << '\n';
  }
  out << r.reports.size() << " reports, " << r.central.clusters.size() << " central clusters, "
      << r.log.incident_count() << " incidents";
  if (r.rejected_sessions > 0) out << ", " << r.rejected_sessions << " rejected session(s)";
  out << '\n';
  if (!complete) {
    out << "not every sensor finished its session\n";
    return kNetwork;
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hierarchical anomaly detection for distribution feeders with micro-PMUs", "gridwatch"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "gridwatch 0.1.0");

  PlaceArgs place;
  auto* c_place = app.add_subcommand("place", "Choose sensor buses");
  c_place->add_option("--feeder", place.feeder, "Feeder file or bundled name")->capture_default_str();
  c_place->add_option("-k,--k", place.k, "Number of sensors")->capture_default_str();
  c_place->add_option("--solver", place.solvers, "greedy, exhaustive or random (repeatable)")
      ->delimiter(',')
      ->capture_default_str();
  c_place->add_option("--seed", place.seed, "Seed of the random solver")->capture_default_str();
  c_place->add_option("--candidates", place.candidates, "three-phase or all")->capture_default_str();
  c_place->add_flag("--reduce-laterals", place.reduce, "Keep only the three-phase backbone");
  c_place->add_option("--threads", place.threads, "Worker threads")->capture_default_str();
  c_place->add_flag("--json", place.json, "JSON output");

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Generate sensor streams for a scenario");
  c_sim->add_option("--scenario", sim.scenario, "Scenario file or bundled name")->required();
  c_sim->add_option("--out", sim.out, "Output directory")->required();
  c_sim->add_option("--seed", sim.seed, "Override the scenario seed");
  c_sim->add_option("--sensors", sim.sensors, "Override the sensor buses")->delimiter(',');

  std::string an_in, an_out;
  ConfigArgs an_cfg;
  auto* c_an = app.add_subcommand("analyze", "Run the detection pipeline in process");
  c_an->add_option("--in", an_in, "Directory written by simulate")->required()->check(CLI::ExistingDirectory);
  c_an->add_option("--out", an_out, "Output directory")->required();
  an_cfg.attach(c_an);

  LocalArgs loc;
  ConfigArgs loc_cfg;
  auto* c_loc = app.add_subcommand("serve-local", "Run one sensor and stream to the central node");
  c_loc->add_option("--in", loc.in, "Directory written by simulate")->check(CLI::ExistingDirectory);
  c_loc->add_option("--bus", loc.bus, "Sensor bus")->required();
  c_loc->add_option("--stream", loc.stream, "Measured stream CSV")->check(CLI::ExistingFile);
  c_loc->add_option("--uplink", loc.uplink, "Stream CSV sent upstream instead")->check(CLI::ExistingFile);
  c_loc->add_option("--feeder", loc.feeder, "Feeder file or bundled name");
  c_loc->add_option("--rate", loc.rate, "Replay speed, 1 = real time, 0 = unpaced")->capture_default_str();
  c_loc->add_option("--spool", loc.spool, "Spool file for unacknowledged messages");
  c_loc->add_option("--connect", loc.connect, "Central node, host:port");
  c_loc->add_option("--wire", loc.wire, "binary or json");
  loc_cfg.attach(c_loc);

  CentralArgs cen;
  ConfigArgs cen_cfg;
  auto* c_cen = app.add_subcommand("serve-central", "Receive sensor streams and run the central engine");
  c_cen->add_option("--in", cen.in, "Directory written by simulate")->check(CLI::ExistingDirectory);
  c_cen->add_option("--feeder", cen.feeder, "Feeder file or bundled name");
  c_cen->add_option("--sensors", cen.sensors, "Sensor buses")->delimiter(',');
  c_cen->add_option("--bind", cen.bind, "Listen address");
  c_cen->add_option("--port", cen.port, "Listen port, 0 = any free port");
  c_cen->add_option("--out", cen.out, "Output directory");
  c_cen->add_option("--wire", cen.wire, "binary or json");
  cen_cfg.attach(c_cen);

  std::string rep_log, rep_truth;
  SampleIndex tolerance = 14;
  bool rep_json = false;
  auto* c_rep = app.add_subcommand("report", "Score an event log against ground truth");
  c_rep->add_option("--eventlog", rep_log, "eventlog.jsonl")->required()->check(CLI::ExistingFile);
  c_rep->add_option("--groundtruth", rep_truth, "groundtruth.json")->required()->check(CLI::ExistingFile);
  c_rep->add_option("--tolerance", tolerance, "Samples of slack around each event")->capture_default_str();
  c_rep->add_flag("--json", rep_json, "JSON output");

  ConfigArgs show_cfg;
  auto* c_cfg = app.add_subcommand("config", "Print the effective configuration");
  show_cfg.attach(c_cfg);

  std::vector<std::string> rest(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(rest);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (c_place->parsed()) return cmd_place(place, out);
    if (c_sim->parsed()) return cmd_simulate(sim, out);
    if (c_an->parsed()) return cmd_analyze(an_in, an_out, an_cfg, out);
    if (c_loc->parsed()) return cmd_serve_local(loc, loc_cfg, out);
    if (c_cen->parsed()) return cmd_serve_central(cen, cen_cfg, out);
    if (c_rep->parsed()) return cmd_report(rep_log, rep_truth, tolerance, rep_json, out);
    if (c_cfg->parsed()) {
      out << dump_config(show_cfg.load());
      return kOk;
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const NetworkError& e) {
    err << "network error: " << e.what() << '\n';
    return kNetwork;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}

}  // namespace gridwatch::cli
