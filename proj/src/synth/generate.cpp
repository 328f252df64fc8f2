// SPDX-License-Identifier: Apache-2.0
#include "gridwatch/synth/generate.hpp"

#include "gridwatch/error.hpp"

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>

namespace gridwatch::synth {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kDefaultFaultAdmittance = 1e3;
constexpr int kMaxIterations = 200;
constexpr double kTolerance = 1e-10;

Mat3c series_in_state(const model::LineSegment& line, const NetworkState& state) {
  Mat3c y = line.series;
  for (int p = 0; p < 3; ++p) {
    if (state.open_phases.contains({line.id, p})) {
      y.row(p).setZero();
      y.col(p).setZero();
    }
  }
  return y;
}

Vec3c source_phasors(double magnitude) {
  return Vec3c(std::polar(magnitude, 0.0), std::polar(magnitude, -2.0 * kPi / 3.0),
               std::polar(magnitude, 2.0 * kPi / 3.0));
}

}  // namespace

Vec3c line_current(const model::FeederModel& feeder, const model::LineSegment& line, BusId bus,
                   const NetworkState& state, const Eigen::VectorXcd& V) {
  const Mat3c y = series_in_state(line, state);
  const auto a = 3 * static_cast<Eigen::Index>(feeder.index_of(line.from));
  const auto b = 3 * static_cast<Eigen::Index>(feeder.index_of(line.to));
  const Vec3c vf = V.segment<3>(a);
  const Vec3c vt = V.segment<3>(b);
  if (bus == line.from) return (y + 0.5 * line.shunt) * vf - y * vt;
  return (y + 0.5 * line.shunt) * vt - y * vf;
}

NetworkSolution solve_network(const model::FeederModel& feeder, const NetworkState& state,
                              double source_v) {
  const auto n = static_cast<Eigen::Index>(feeder.bus_count());
  Eigen::MatrixXcd Y = Eigen::MatrixXcd::Zero(3 * n, 3 * n);
  for (const auto& line : feeder.lines()) {
    const Mat3c y = series_in_state(line, state);
    const auto a = 3 * static_cast<Eigen::Index>(feeder.index_of(line.from));
    const auto b = 3 * static_cast<Eigen::Index>(feeder.index_of(line.to));
    Y.block<3, 3>(a, a) += y + 0.5 * line.shunt;
    Y.block<3, 3>(b, b) += y + 0.5 * line.shunt;
    Y.block<3, 3>(a, b) -= y;
    Y.block<3, 3>(b, a) -= y;
  }
  for (const auto& [key, g] : state.fault_shunts) {
    const auto r = 3 * static_cast<Eigen::Index>(feeder.index_of(key.first)) + key.second;
    Y(r, r) += g;
  }

  // Unknown nodes: every existing phase of every non-slack bus.
  std::vector<Eigen::Index> unknown, slack;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& bus = feeder.buses()[static_cast<std::size_t>(i)];
    const auto mask = feeder.bus_phases(bus.id);
    for (int p = 0; p < 3; ++p) {
      if (!mask.has(p)) continue;
      (bus.slack ? slack : unknown).push_back(3 * i + p);
    }
  }
  const auto nu = static_cast<Eigen::Index>(unknown.size());
  const auto ns = static_cast<Eigen::Index>(slack.size());
  Eigen::MatrixXcd Yll(nu, nu), Yls(nu, ns);
  for (Eigen::Index r = 0; r < nu; ++r) {
    for (Eigen::Index c = 0; c < nu; ++c) Yll(r, c) = Y(unknown[static_cast<std::size_t>(r)], unknown[static_cast<std::size_t>(c)]);
    for (Eigen::Index c = 0; c < ns; ++c) Yls(r, c) = Y(unknown[static_cast<std::size_t>(r)], slack[static_cast<std::size_t>(c)]);
  }

  const Vec3c src = source_phasors(source_v * state.source_scale);
  Eigen::VectorXcd V = Eigen::VectorXcd::Zero(3 * n);
  Eigen::VectorXcd Vs(ns);
  for (Eigen::Index c = 0; c < ns; ++c) {
    const auto node = slack[static_cast<std::size_t>(c)];
    Vs(c) = src(node % 3);
    V(node) = Vs(c);
  }
  Eigen::VectorXcd Vl(nu);
  for (Eigen::Index r = 0; r < nu; ++r) Vl(r) = src(unknown[static_cast<std::size_t>(r)] % 3);

  // Consumed power per unknown node.
  Eigen::VectorXcd S = Eigen::VectorXcd::Zero(nu);
  for (Eigen::Index r = 0; r < nu; ++r) {
    const auto node = unknown[static_cast<std::size_t>(r)];
    const BusId id = feeder.buses()[static_cast<std::size_t>(node / 3)].id;
    auto it = state.loads.find(id);
    if (it != state.loads.end()) S(r) = it->second(node % 3);
  }

  // Loads switch to constant impedance once their voltage drops below the
  // threshold; those loads move into the matrix so floating sections (an
  // open phase) stay solvable. Switching is one-way within a solve.
  const Eigen::VectorXcd rhs_fixed = -Yls * Vs;
  // Phase nodes with no conductive path to the source (behind an open
  // phase) are de-energized: their loads start as constant impedance.
  std::vector<bool> energized(static_cast<std::size_t>(3 * n), false);
  {
    std::vector<Eigen::Index> todo(slack.begin(), slack.end());
    for (auto node : slack) energized[static_cast<std::size_t>(node)] = true;
    while (!todo.empty()) {
      const auto node = todo.back();
      todo.pop_back();
      const BusId id = feeder.buses()[static_cast<std::size_t>(node / 3)].id;
      const int p = static_cast<int>(node % 3);
      for (const auto* line : feeder.incident_lines(id)) {
        if (series_in_state(*line, state)(p, p) == Complex(0.0, 0.0)) continue;
        const BusId other = line->from == id ? line->to : line->from;
        const auto next = 3 * static_cast<Eigen::Index>(feeder.index_of(other)) + p;
        if (!energized[static_cast<std::size_t>(next)]) {
          energized[static_cast<std::size_t>(next)] = true;
          todo.push_back(next);
        }
      }
    }
  }
  std::vector<bool> const_z(static_cast<std::size_t>(nu), false);
  for (Eigen::Index r = 0; r < nu; ++r) {
    const_z[static_cast<std::size_t>(r)] = !energized[static_cast<std::size_t>(unknown[static_cast<std::size_t>(r)])];
  }
  int iter = 0;
  bool converged = false;
  while (!converged && iter < kMaxIterations) {
    Eigen::MatrixXcd A = Yll;
    for (Eigen::Index r = 0; r < nu; ++r) {
      if (const_z[static_cast<std::size_t>(r)]) A(r, r) += std::conj(S(r)) / (kConstantZBelow * kConstantZBelow);
    }
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(A);
    bool switched = false;
    while (!switched && !converged && iter < kMaxIterations) {
      ++iter;
      Eigen::VectorXcd Iinj = Eigen::VectorXcd::Zero(nu);
      for (Eigen::Index r = 0; r < nu; ++r) {
        if (!const_z[static_cast<std::size_t>(r)] && S(r) != Complex(0.0, 0.0)) {
          Iinj(r) = -std::conj(S(r) / Vl(r));
        }
      }
      Eigen::VectorXcd next = lu.solve(Iinj + rhs_fixed);
      const double step = (next - Vl).cwiseAbs().maxCoeff();
      Vl = next;
      for (Eigen::Index r = 0; r < nu; ++r) {
        if (!const_z[static_cast<std::size_t>(r)] && S(r) != Complex(0.0, 0.0) &&
            std::abs(Vl(r)) < kConstantZBelow) {
          const_z[static_cast<std::size_t>(r)] = true;
          switched = true;
        }
      }
      if (!switched && step < kTolerance) converged = true;
      if (!std::isfinite(step)) break;
    }
  }
  if (!converged) {
    throw DataError("load flow did not converge within " + std::to_string(kMaxIterations) +
                    " iterations");
  }
  for (Eigen::Index r = 0; r < nu; ++r) V(unknown[static_cast<std::size_t>(r)]) = Vl(r);

  NetworkSolution sol;
  sol.iterations = iter;
  sol.V = V;
  sol.I = Eigen::VectorXcd::Zero(3 * n);
  for (const auto& b : feeder.buses()) sol.bus_ids.push_back(b.id);
  for (const auto& line : feeder.lines()) {
    for (BusId end : {line.from, line.to}) {
      const auto r = 3 * static_cast<Eigen::Index>(feeder.index_of(end));
      sol.I.segment<3>(r) += line_current(feeder, line, end, state, V);
    }
  }
  return sol;
}

NetworkState state_at(const Scenario& sc, const model::FeederModel& feeder, SampleIndex k) {
  NetworkState st;
  for (const auto& [bus, s] : sc.loads) st.loads[bus] = s * sc.load_scale;
  for (const auto& e : sc.events) {
    if (k < e.start_k || k >= e.end_k) continue;
    switch (e.kind) {
      case EventKind::VoltageSag:
        st.source_scale *= 1.0 - e.magnitude;
        break;
      case EventKind::SLGFault: {
        const auto* line = feeder.find_line(*e.line);
        const double g = e.magnitude > 0.0 ? e.magnitude : kDefaultFaultAdmittance;
        for (int p = 0; p < 3; ++p) {
          if (e.phases.has(p)) st.fault_shunts[{line->to, p}] += Complex(g, 0.0);
        }
        break;
      }
      case EventKind::FuseOpen:
        for (int p = 0; p < 3; ++p) {
          if (e.phases.has(p)) st.open_phases.insert({*e.line, p});
        }
        break;
      case EventKind::LoadLoss: {
        auto it = st.loads.find(*e.bus);
        if (it == st.loads.end()) break;
        const double keep = e.magnitude > 0.0 ? 1.0 - e.magnitude : 0.0;
        for (int p = 0; p < 3; ++p) {
          if (e.phases.has(p)) it->second(p) *= keep;
        }
        break;
      }
      case EventKind::LoadStep: {
        auto& load = st.loads[*e.bus];
        for (int p = 0; p < 3; ++p) {
          if (e.phases.has(p)) load(p) *= 1.0 + e.magnitude;
        }
        break;
      }
      case EventKind::ReplayAttack:
        break;
    }
  }
  return st;
}

namespace {

GroundTruthEntry truth_for(const Event& e, const model::FeederModel& feeder) {
  GroundTruthEntry g;
  g.event = e;
  switch (e.kind) {
    case EventKind::VoltageSag:
      g.affected_buses = {feeder.slack()};
      g.expected_rules = {"voltage_mag"};
      break;
    case EventKind::SLGFault: {
      const auto* line = feeder.find_line(*e.line);
      g.affected_buses = {line->from, line->to};
      g.affected_lines = {line->id};
      g.expected_rules = {"voltage_mag", "current_mag", "active_power", "reactive_power",
                          "qss_validity"};
      break;
    }
    case EventKind::FuseOpen: {
      const auto* line = feeder.find_line(*e.line);
      g.affected_buses = {line->from, line->to};
      g.affected_lines = {line->id};
      g.expected_rules = {"current_mag", "active_power"};
      break;
    }
    case EventKind::LoadLoss:
    case EventKind::LoadStep:
      g.affected_buses = {*e.bus};
      g.expected_rules = {"active_power", "current_mag"};
      break;
    case EventKind::ReplayAttack:
      g.affected_buses = {*e.bus};
      break;
  }
  return g;
}

struct Snapshot {
  Vec3c v;
  std::map<std::string, Vec3c> i;
};

}  // namespace

nlohmann::json to_json(const GroundTruth& gt) {
  nlohmann::json j;
  j["scenario"] = gt.scenario;
  j["events"] = nlohmann::json::array();
  for (const auto& g : gt.events) {
    nlohmann::json je = to_json(g.event);
    je["affected_buses"] = g.affected_buses;
    je["affected_lines"] = g.affected_lines;
    je["expected_rules"] = g.expected_rules;
    j["events"].push_back(je);
  }
  return j;
}

GroundTruth ground_truth_from_json(const nlohmann::json& j) {
  try {
    GroundTruth gt;
    gt.scenario = j.value("scenario", std::string());
    for (const auto& je : j.at("events")) {
      GroundTruthEntry g;
      g.event.kind = event_kind_from_string(je.at("kind").get<std::string>());
      if (je.contains("bus")) g.event.bus = je.at("bus").get<BusId>();
      if (je.contains("line")) g.event.line = je.at("line").get<std::string>();
      g.event.phases = model::PhaseMask::parse(je.at("phases").get<std::string>());
      g.event.start_k = je.at("start_k").get<SampleIndex>();
      g.event.end_k = je.at("end_k").get<SampleIndex>();
      g.event.magnitude = je.value("magnitude", 0.0);
      g.affected_buses = je.at("affected_buses").get<std::vector<BusId>>();
      g.affected_lines = je.at("affected_lines").get<std::vector<std::string>>();
      g.expected_rules = je.at("expected_rules").get<std::vector<std::string>>();
      gt.events.push_back(std::move(g));
    }
    return gt;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed ground truth: ") + e.what());
  }
}

SimulationResult generate(const Scenario& sc, const model::FeederModel& feeder,
                          const std::vector<BusId>& sensor_override) {
  validate_scenario(sc, feeder);
  std::vector<BusId> sensors = sensor_override.empty() ? sc.sensors : sensor_override;
  std::sort(sensors.begin(), sensors.end());
  sensors.erase(std::unique(sensors.begin(), sensors.end()), sensors.end());
  if (sensors.empty()) throw ValidationError("scenario has no sensor buses");
  for (BusId b : sensors) {
    if (!feeder.has_bus(b)) throw ValidationError("sensor on unknown bus " + std::to_string(b));
  }

  const SampleIndex n = sc.samples();
  // Interval boundaries where the network state may change.
  std::vector<SampleIndex> bounds{0};
  for (const auto& e : sc.events) {
    if (e.kind == EventKind::ReplayAttack) continue;
    if (e.start_k > 0 && e.start_k < n) bounds.push_back(e.start_k);
    if (e.end_k > 0 && e.end_k < n) bounds.push_back(e.end_k);
  }
  std::sort(bounds.begin(), bounds.end());
  bounds.erase(std::unique(bounds.begin(), bounds.end()), bounds.end());

  // Noiseless, unrotated sensor snapshots per interval.
  std::vector<std::map<BusId, Snapshot>> snaps;
  for (std::size_t s = 0; s < bounds.size(); ++s) {
    const auto st = state_at(sc, feeder, bounds[s]);
    NetworkSolution sol;
    try {
      sol = solve_network(feeder, st, sc.source_v);
    } catch (const DataError& e) {
      const SampleIndex end = s + 1 < bounds.size() ? bounds[s + 1] : n;
      throw DataError(std::string(e.what()) + " for samples [" + std::to_string(bounds[s]) + ", " +
                      std::to_string(end) + ")");
    }
    std::map<BusId, Snapshot> m;
    for (BusId b : sensors) {
      Snapshot snap;
      snap.v = sol.V.segment<3>(3 * static_cast<Eigen::Index>(feeder.index_of(b)));
      for (const auto* line : feeder.incident_lines(b)) {
        snap.i[line->id] = line_current(feeder, *line, b, st, sol.V);
      }
      m[b] = std::move(snap);
    }
    snaps.push_back(std::move(m));
  }

  boost::random::mt19937_64 rng(sc.seed);
  boost::random::normal_distribution<double> gauss(0.0, 1.0);
  const double amp = sc.noise_sigma / std::sqrt(2.0);
  auto noise = [&]() {
    const double re = gauss(rng);
    const double im = gauss(rng);
    return Complex(amp * re, amp * im);
  };

  SimulationResult out;
  for (BusId b : sensors) out.streams[b].reserve(static_cast<std::size_t>(n));
  double theta = 0.0;
  std::size_t seg = 0;
  for (SampleIndex k = 0; k < n; ++k) {
    if (k > 0) theta += sc.beta_at(k);
    while (seg + 1 < bounds.size() && bounds[seg + 1] <= k) ++seg;
    // Two-sample raised-cosine blend into a new interval.
    double w_new = 1.0;
    if (seg > 0) {
      const SampleIndex since = k - bounds[seg];
      if (since == 0) w_new = 0.25;
      if (since == 1) w_new = 0.75;
    }
    const Complex rot = std::polar(1.0, theta);
    for (BusId b : sensors) {
      const auto& cur = snaps[seg].at(b);
      analytics::PhasorFrame f;
      f.k = k;
      f.bus = b;
      if (w_new < 1.0) {
        const auto& old = snaps[seg - 1].at(b);
        f.v = w_new * cur.v + (1.0 - w_new) * old.v;
        for (const auto& [id, i] : cur.i) f.i_lines[id] = w_new * i + (1.0 - w_new) * old.i.at(id);
      } else {
        f.v = cur.v;
        f.i_lines = cur.i;
      }
      f.v *= rot;
      for (int p = 0; p < 3; ++p) f.v(p) += noise();
      for (auto& [id, i] : f.i_lines) {
        i *= rot;
        for (int p = 0; p < 3; ++p) i(p) += noise();
      }
      out.streams[b].push_back(std::move(f));
    }
  }

  out.truth.scenario = sc.name;
  for (const auto& e : sc.events) {
    out.truth.events.push_back(truth_for(e, feeder));
    if (e.kind != EventKind::ReplayAttack) continue;
    const BusId b = *e.bus;
    if (!out.streams.contains(b)) continue;
    const auto& base = out.uplink.contains(b) ? out.uplink.at(b) : out.streams.at(b);
    out.uplink[b] = apply_replay_attack(base, e.start_k, e.end_k, sc.replay_window);
  }
  return out;
}

std::vector<analytics::PhasorFrame> apply_replay_attack(
    const std::vector<analytics::PhasorFrame>& stream, SampleIndex start, SampleIndex end,
    int window) {
  std::vector<analytics::PhasorFrame> out = stream;
  // Source window: the last `window` frames with k < start.
  std::vector<const analytics::PhasorFrame*> src;
  for (const auto& f : stream) {
    if (f.k < start) src.push_back(&f);
  }
  if (src.empty()) return out;
  const auto w = std::min<std::size_t>(src.size(), static_cast<std::size_t>(std::max(window, 1)));
  src.erase(src.begin(), src.end() - static_cast<std::ptrdiff_t>(w));
  std::size_t pos = 0;
  for (auto& f : out) {
    if (f.k < start || f.k > end) continue;
    const SampleIndex k = f.k;
    f = *src[pos % w];
    f.k = k;
    ++pos;
  }
  return out;
}

Streams apply_replay_attack(const Streams& streams, BusId sensor, SampleIndex start,
                            SampleIndex end, int window) {
  Streams out = streams;
  auto it = out.find(sensor);
  if (it != out.end()) it->second = apply_replay_attack(it->second, start, end, window);
  return out;
}

Streams central_view(const SimulationResult& sim) {
  Streams out = sim.streams;
  for (const auto& [b, s] : sim.uplink) out[b] = s;
  return out;
}

}  // namespace gridwatch::synth
