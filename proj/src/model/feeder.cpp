// SPDX-License-Identifier: Apache-2.0
#include "gridwatch/model/feeder.hpp"

#include "gridwatch/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>

namespace gridwatch::model {

namespace {

constexpr std::string_view kPhaseNames = "abc";

Mat3c parse_matrix(const nlohmann::json& rows, const std::string& what) {
  if (!rows.is_array() || rows.size() != 3) {
    throw DataError(what + ": expected 3 rows");
  }
  Mat3c m;
  for (int r = 0; r < 3; ++r) {
    const auto& row = rows[static_cast<std::size_t>(r)];
    if (!row.is_array() || row.size() != 3) {
      throw DataError(what + ": expected 3 columns");
    }
    for (int c = 0; c < 3; ++c) {
      const auto& cell = row[static_cast<std::size_t>(c)];
      if (!cell.is_array() || cell.size() != 2) {
        throw DataError(what + ": entries must be [re, im] pairs");
      }
      m(r, c) = Complex(cell[0].get<double>(), cell[1].get<double>());
    }
  }
  return m;
}

void zero_absent(Mat3c& m, const PhaseMask& mask) {
  for (int p = 0; p < 3; ++p) {
    if (!mask.has(p)) {
      m.row(p).setZero();
      m.col(p).setZero();
    }
  }
}

}  // namespace

PhaseMask PhaseMask::all() { return PhaseMask{{true, true, true}}; }

PhaseMask PhaseMask::parse(std::string_view text) {
  PhaseMask mask;
  for (char ch : text) {
    auto pos = kPhaseNames.find(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    if (pos == std::string_view::npos || mask.present[pos]) {
      throw DataError("invalid phase set '" + std::string(text) + "'");
    }
    mask.present[pos] = true;
  }
  if (!mask.any()) {
    throw DataError("phase set must name at least one phase");
  }
  return mask;
}

int PhaseMask::count() const {
  return static_cast<int>(std::count(present.begin(), present.end(), true));
}

std::string PhaseMask::str() const {
  std::string out;
  for (int p = 0; p < 3; ++p) {
    if (has(p)) out.push_back(kPhaseNames[static_cast<std::size_t>(p)]);
  }
  return out;
}

PhaseMask PhaseMask::operator|(const PhaseMask& other) const {
  PhaseMask out;
  for (std::size_t p = 0; p < 3; ++p) out.present[p] = present[p] || other.present[p];
  return out;
}

FeederModel::FeederModel(std::string name, double base_mva, std::vector<Bus> buses,
                         std::vector<LineSegment> lines)
    : name_(std::move(name)),
      base_mva_(base_mva),
      buses_(std::move(buses)),
      lines_(std::move(lines)) {
  for (std::size_t i = 0; i < buses_.size(); ++i) {
    if (!index_.emplace(buses_[i].id, i).second) {
      throw ValidationError("duplicate bus id " + std::to_string(buses_[i].id));
    }
    if (buses_[i].slack) slack_ = buses_[i].id;
  }
  validate();
}

void FeederModel::validate() const {
  if (!(base_mva_ > 0.0)) throw ValidationError("base_mva must be positive");
  if (buses_.empty()) throw ValidationError("feeder has no buses");

  int slack_count = 0;
  for (const auto& b : buses_) {
    if (!(b.kv_base > 0.0)) {
      throw ValidationError("bus " + std::to_string(b.id) + ": kv_base must be positive");
    }
    if (b.slack) ++slack_count;
  }
  if (slack_count != 1) {
    throw ValidationError("feeder must have exactly one slack bus, found " +
                          std::to_string(slack_count));
  }

  std::set<std::pair<BusId, BusId>> seen_pairs;
  std::set<std::string> seen_ids;
  for (const auto& line : lines_) {
    if (!has_bus(line.from) || !has_bus(line.to)) {
      throw ValidationError("line " + line.id + " references unknown bus " +
                            std::to_string(has_bus(line.from) ? line.to : line.from));
    }
    if (line.from == line.to) throw ValidationError("line " + line.id + " is a self loop");
    if (!line.phases.any()) throw ValidationError("line " + line.id + " has no phases");
    auto key = std::minmax(line.from, line.to);
    if (!seen_pairs.insert(key).second) {
      throw ValidationError("duplicate line between buses " + std::to_string(key.first) +
                            " and " + std::to_string(key.second) + " (" + line.id + ")");
    }
    if (!seen_ids.insert(line.id).second) {
      throw ValidationError("duplicate line id " + line.id);
    }
    const double scale = std::max(1.0, line.series.cwiseAbs().maxCoeff());
    if ((line.series - line.series.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
      throw ValidationError("line " + line.id + ": series admittance is not symmetric");
    }
    for (int p = 0; p < 3; ++p) {
      if (line.phases.has(p) && !(line.rated_current(p) > 0.0)) {
        throw ValidationError("line " + line.id + ": rating must be positive on phase " +
                              std::string(1, kPhaseNames[static_cast<std::size_t>(p)]));
      }
      if (!line.phases.has(p) &&
          (line.series.row(p).cwiseAbs().sum() + line.series.col(p).cwiseAbs().sum() +
           line.shunt.row(p).cwiseAbs().sum() + line.shunt.col(p).cwiseAbs().sum()) != 0.0) {
        throw ValidationError("line " + line.id + ": absent phase has nonzero admittance");
      }
    }
  }

  // Connectivity from the slack bus.
  std::vector<std::vector<std::size_t>> adj(buses_.size());
  for (const auto& line : lines_) {
    auto a = index_.at(line.from);
    auto b = index_.at(line.to);
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<bool> reached(buses_.size(), false);
  std::queue<std::size_t> todo;
  todo.push(index_.at(slack()));
  reached[todo.front()] = true;
  while (!todo.empty()) {
    auto cur = todo.front();
    todo.pop();
    for (auto nxt : adj[cur]) {
      if (!reached[nxt]) {
        reached[nxt] = true;
        todo.push(nxt);
      }
    }
  }
  for (std::size_t i = 0; i < buses_.size(); ++i) {
    if (!reached[i]) {
      throw ValidationError("feeder is disconnected: bus " + std::to_string(buses_[i].id) +
                            " is not reachable from the slack bus");
    }
  }
}

std::size_t FeederModel::index_of(BusId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw std::out_of_range("unknown bus " + std::to_string(id));
  return it->second;
}

const LineSegment* FeederModel::find_line(std::string_view id) const {
  for (const auto& line : lines_) {
    if (line.id == id) return &line;
  }
  return nullptr;
}

PhaseMask FeederModel::bus_phases(BusId id) const {
  PhaseMask mask;
  for (const auto& line : lines_) {
    if (line.from == id || line.to == id) mask = mask | line.phases;
  }
  return mask;
}

std::vector<const LineSegment*> FeederModel::incident_lines(BusId id) const {
  std::vector<const LineSegment*> out;
  for (const auto& line : lines_) {
    if (line.from == id || line.to == id) out.push_back(&line);
  }
  return out;
}

double FeederModel::impedance_base(BusId id) const {
  const double kv = bus(id).kv_base;
  return kv * kv / base_mva_;
}

double FeederModel::current_base(BusId id) const {
  return base_mva_ * 1e3 / (std::sqrt(3.0) * bus(id).kv_base);
}

double FeederModel::voltage_base(BusId id) const { return bus(id).kv_base * 1e3 / std::sqrt(3.0); }

FeederModel parse_feeder(const nlohmann::json& doc) {
  try {
    const double base_mva = doc.at("base_mva").get<double>();
    const BusId slack = doc.at("slack").get<BusId>();
    std::vector<Bus> buses;
    std::unordered_map<BusId, double> kv;
    for (const auto& jb : doc.at("buses")) {
      Bus b;
      b.id = jb.at("id").get<BusId>();
      b.name = jb.value("name", std::to_string(b.id));
      b.kv_base = jb.at("kv_base").get<double>();
      b.slack = (b.id == slack) || jb.value("type", std::string("pq")) == "slack";
      kv[b.id] = b.kv_base;
      buses.push_back(std::move(b));
    }
    std::vector<LineSegment> lines;
    for (const auto& jl : doc.at("lines")) {
      LineSegment line;
      line.from = jl.at("from").get<BusId>();
      line.to = jl.at("to").get<BusId>();
      line.id = jl.value("id", std::to_string(line.from) + "-" + std::to_string(line.to));
      line.kind = jl.value("kind", std::string("line"));
      line.phases = PhaseMask::parse(jl.at("phases").get<std::string>());
      auto it = kv.find(line.from);
      if (it == kv.end()) {
        throw ValidationError("line " + line.id + " references unknown bus " +
                              std::to_string(line.from));
      }
      if (!kv.contains(line.to)) {
        throw ValidationError("line " + line.id + " references unknown bus " +
                              std::to_string(line.to));
      }
      const double z_base = it->second * it->second / base_mva;
      const double i_base = base_mva * 1e3 / (std::sqrt(3.0) * it->second);
      line.series = parse_matrix(jl.at("series"), "line " + line.id + " series") * z_base;
      line.shunt = parse_matrix(jl.at("shunt"), "line " + line.id + " shunt") * z_base;
      zero_absent(line.series, line.phases);
      zero_absent(line.shunt, line.phases);
      const auto& rating = jl.at("rating_amps");
      for (int p = 0; p < 3; ++p) {
        double amps = rating.is_array() ? rating.at(static_cast<std::size_t>(p)).get<double>()
                                        : rating.get<double>();
        line.rated_current(p) = line.phases.has(p) ? amps / i_base : 0.0;
      }
      lines.push_back(std::move(line));
    }
    std::string name = doc.value("name", std::string("feeder"));
    return FeederModel(std::move(name), base_mva, std::move(buses), std::move(lines));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("feeder parse error: ") + e.what());
  }
}

FeederModel load_feeder(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open feeder file " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return parse_feeder(doc);
}

ReducedFeeder reduce_laterals(const FeederModel& feeder) {
  const auto n = feeder.bus_count();
  std::vector<std::vector<std::pair<std::size_t, bool>>> adj(n);
  for (const auto& line : feeder.lines()) {
    auto a = feeder.index_of(line.from);
    auto b = feeder.index_of(line.to);
    adj[a].emplace_back(b, line.phases.full());
    adj[b].emplace_back(a, line.phases.full());
  }

  // Backbone: buses reachable from the slack over three-phase lines only.
  std::vector<bool> kept(n, false);
  std::queue<std::size_t> todo;
  todo.push(feeder.index_of(feeder.slack()));
  kept[todo.front()] = true;
  while (!todo.empty()) {
    auto cur = todo.front();
    todo.pop();
    for (auto [nxt, three_phase] : adj[cur]) {
      if (three_phase && !kept[nxt]) {
        kept[nxt] = true;
        todo.push(nxt);
      }
    }
  }

  ReducedFeeder out{feeder, {}};
  std::vector<bool> visited = kept;
  for (std::size_t root = 0; root < n; ++root) {
    if (!kept[root]) continue;
    for (auto [first, three_phase] : adj[root]) {
      if (visited[first]) continue;
      std::vector<BusId> subtree;
      std::queue<std::size_t> walk;
      walk.push(first);
      visited[first] = true;
      while (!walk.empty()) {
        auto cur = walk.front();
        walk.pop();
        subtree.push_back(feeder.buses()[cur].id);
        for (auto [nxt, unused] : adj[cur]) {
          if (!visited[nxt]) {
            visited[nxt] = true;
            walk.push(nxt);
          }
        }
      }
      std::sort(subtree.begin(), subtree.end());
      out.provenance[feeder.buses()[root].id].push_back(std::move(subtree));
    }
  }

  if (out.provenance.empty()) return out;

  std::vector<Bus> buses;
  for (std::size_t i = 0; i < n; ++i) {
    if (kept[i]) buses.push_back(feeder.buses()[i]);
  }
  std::vector<LineSegment> lines;
  for (const auto& line : feeder.lines()) {
    if (line.phases.full() && kept[feeder.index_of(line.from)] && kept[feeder.index_of(line.to)]) {
      lines.push_back(line);
    }
  }
  out.feeder = FeederModel(feeder.name() + "-reduced", feeder.base_mva(), std::move(buses),
                           std::move(lines));
  return out;
}

}  // namespace gridwatch::model
