// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "gridwatch/model/feeder.hpp"
#include "gridwatch/model/system.hpp"
#include "gridwatch/synth/generate.hpp"
#include "gridwatch/synth/scenario.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace gridwatch::test {

inline std::filesystem::path data_path(const std::string& rel) {
  return std::filesystem::path(GRIDWATCH_DATA_DIR) / rel;
}

inline const model::FeederModel& ieee34() {
  static const auto f = model::load_feeder(data_path("feeders/ieee34.feeder"));
  return f;
}

inline const model::SystemMatrix& ieee34_system() {
  static const auto s = model::build_system(ieee34());
  return s;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("gridwatch_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline nlohmann::json to_json3(const Mat3c& m) {
  auto j = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) {
    auto row = nlohmann::json::array();
    for (int c = 0; c < 3; ++c) row.push_back({m(r, c).real(), m(r, c).imag()});
    j.push_back(row);
  }
  return j;
}

struct ToyLine {
  BusId from = 0;
  BusId to = 0;
  std::string phases = "abc";
  Mat3c series = Mat3c::Zero();  ///< siemens
  Mat3c shunt = Mat3c::Zero();   ///< siemens
  double rating_amps = 100.0;
};

/// Feeder at 4.16 kV with bus 1 as the slack.
inline nlohmann::json toy_doc(int buses, const std::vector<ToyLine>& lines) {
  nlohmann::json doc;
  doc["name"] = "toy";
  doc["base_mva"] = 1.0;
  doc["slack"] = 1;
  for (int b = 1; b <= buses; ++b) doc["buses"].push_back({{"id", b}, {"kv_base", 4.16}});
  for (const auto& l : lines) {
    doc["lines"].push_back({{"from", l.from},
                            {"to", l.to},
                            {"phases", l.phases},
                            {"series", to_json3(l.series)},
                            {"shunt", to_json3(l.shunt)},
                            {"rating_amps", l.rating_amps}});
  }
  return doc;
}

inline model::FeederModel toy_feeder(int buses, const std::vector<ToyLine>& lines) {
  return model::parse_feeder(toy_doc(buses, lines));
}

/// Complex-symmetric series admittance of a typical overhead line, siemens.
inline Mat3c random_series(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.5, 1.5);
  Mat3c y;
  for (int r = 0; r < 3; ++r) {
    for (int c = r; c < 3; ++c) {
      const double s = r == c ? 1.0 : -0.25;
      y(r, c) = Complex(s * u(rng), -2.0 * s * u(rng));
      y(c, r) = y(r, c);
    }
  }
  return y;
}

inline Mat3c random_shunt(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.5, 1.5);
  Mat3c y = Mat3c::Zero();
  for (int r = 0; r < 3; ++r) {
    for (int c = r; c < 3; ++c) {
      y(r, c) = Complex(0.0, (r == c ? 1e-5 : -3e-6) * u(rng));
      y(c, r) = y(r, c);
    }
  }
  return y;
}

/// Random radial feeder; laterals carry a subset of their parent's phases
/// unless `three_phase_only`.
inline model::FeederModel random_radial_feeder(int buses, std::mt19937_64& rng, bool three_phase_only = false) {
  static const char* kMasks[] = {"abc", "abc", "abc", "ab", "bc", "a", "b", "c"};
  std::vector<ToyLine> lines;
  std::vector<std::string> mask_of(static_cast<std::size_t>(buses + 1), "abc");
  for (int b = 2; b <= buses; ++b) {
    const int parent = std::uniform_int_distribution<int>(1, b - 1)(rng);
    std::string m = "abc";
    if (!three_phase_only) {
      const std::string& pm = mask_of[static_cast<std::size_t>(parent)];
      // Keep the phases the parent has.
      std::string cand = kMasks[std::uniform_int_distribution<int>(0, 7)(rng)];
      m.clear();
      for (char c : cand) {
        if (pm.find(c) != std::string::npos) m += c;
      }
      if (m.empty()) m = pm;
    }
    mask_of[static_cast<std::size_t>(b)] = m;
    lines.push_back({parent, b, m, random_series(rng), random_shunt(rng), 100.0});
  }
  return toy_feeder(buses, lines);
}

}  // namespace gridwatch::test
