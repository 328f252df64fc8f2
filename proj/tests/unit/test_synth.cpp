// SPDX-License-Identifier: Apache-2.0
#include "support.hpp"

#include "gridwatch/analytics/qss.hpp"
#include "gridwatch/analytics/rules.hpp"
#include "gridwatch/central/central.hpp"
#include "gridwatch/error.hpp"
#include "gridwatch/synth/csv.hpp"

#include <doctest.h>

#include <fstream>
#include <numbers>
#include <sstream>

using namespace gridwatch;
using namespace gridwatch::synth;

namespace {

synth::Scenario quiet_scenario() {
  auto sc = load_scenario(test::data_path("scenarios/quiet.json"));
  sc.duration_s = 1.0;
  return sc;
}

// 1 - 2 - 3 with a branch 2 - 4, loads at 3 and 4.
model::FeederModel branch_toy() {
  std::mt19937_64 rng(21);
  return test::toy_feeder(4, {{1, 2, "abc", test::random_series(rng) * 20.0},
                              {2, 3, "abc", test::random_series(rng) * 20.0},
                              {2, 4, "abc", test::random_series(rng) * 20.0}});
}

Scenario toy_scenario() {
  Scenario sc;
  sc.name = "toy";
  sc.duration_s = 2.0;
  sc.noise_sigma = 0.0;
  sc.loads[3] = Vec3c::Constant(Complex(0.1, 0.04));
  sc.loads[4] = Vec3c::Constant(Complex(0.1, 0.04));
  sc.sensors = {2, 3, 4};
  return sc;
}

std::string csv_of(const std::vector<analytics::PhasorFrame>& frames) {
  std::ostringstream os;
  write_stream_csv(os, frames);
  return os.str();
}

}  // namespace

TEST_SUITE("synth") {
  TEST_CASE("noiseless streams satisfy Kirchhoff with every bus observed") {
    const auto& f = test::ieee34();
    const auto sc = quiet_scenario();
    const auto sim = generate(sc, f, [&] {
      std::vector<BusId> all;
      for (const auto& b : f.buses()) all.push_back(b.id);
      return all;
    }());
    const auto& s = test::ieee34_system();
    const model::Placement full(s.bus_ids);
    for (SampleIndex k : {SampleIndex{0}, SampleIndex{57}, sc.samples() - 1}) {
      std::vector<const analytics::PhasorFrame*> frames;
      for (const BusId b : full.buses()) frames.push_back(&sim.streams.at(b)[static_cast<std::size_t>(k)]);
      const auto fused = central::fuse_frames(full, k, frames);
      REQUIRE(fused.complete());
      // In per-unit H is [I | -Y_pu]; the column order follows the partition.
      const auto part = model::partition(s, full);
      Eigen::VectorXcd d(s.H.cols());
      for (std::size_t c = 0; c < part.a_cols.size(); ++c) d(part.a_cols[c].h_col) = fused.d_a(static_cast<Eigen::Index>(c));
      const auto n = s.Y_pu.rows();
      const Eigen::VectorXcd r = d.head(n) - s.Y_pu * d.tail(n);
      CHECK(r.norm() <= 1e-10 * d.norm());
    }
  }

  TEST_CASE("drift is recovered by the frequency tracker") {
    auto sc = quiet_scenario();
    sc.duration_s = 3.0;
    sc.beta_profile = {{0, 2 * std::numbers::pi * 0.3 * kSamplePeriod}, {200, -2 * std::numbers::pi * 0.2 * kSamplePeriod}};
    const auto sim = generate(sc, test::ieee34());
    analytics::FrequencyTracker ft;
    for (const auto& fr : sim.streams.at(19)) {
      ft.update(fr.v);
      if (fr.k == 199) CHECK(ft.delta_hz() == doctest::Approx(0.3).epsilon(1e-6));
    }
    CHECK(ft.delta_hz() == doctest::Approx(-0.2).epsilon(1e-6));
  }

  TEST_CASE("generated steady windows are rank one") {
    auto sc = quiet_scenario();
    sc.beta_profile = {{0, 2 * std::numbers::pi * 0.5 * kSamplePeriod}};
    const auto sim = generate(sc, test::ieee34());
    for (const auto& [bus, frames] : sim.streams) {
      for (const auto& [line, i0] : frames.front().i_lines) {
        analytics::WindowBuffer w(12);
        for (const auto& fr : frames) {
          w.push(fr.v, fr.i_lines.at(line));
          if (!w.full()) continue;
          const auto R = *analytics::qss_correlations(w);
          const double s0 = Eigen::JacobiSVD<analytics::Mat63c>(R).singularValues()(0);
          CHECK(analytics::qss_residual(R) <= 1e-10 * s0 * s0);
        }
      }
    }
  }

  TEST_CASE("noise has E|n|^2 = sigma^2") {
    auto sc = quiet_scenario();
    sc.duration_s = 5.0;
    const auto clean = generate(sc, test::ieee34());
    sc.noise_sigma = 0.01;
    const auto noisy = generate(sc, test::ieee34());
    double sum = 0.0;
    std::int64_t n = 0;
    for (const auto& [bus, frames] : noisy.streams) {
      for (std::size_t k = 0; k < frames.size(); ++k) {
        const auto& a = frames[k];
        const auto& b = clean.streams.at(bus)[k];
        sum += (a.v - b.v).squaredNorm();
        n += 3;
        for (const auto& [line, i] : a.i_lines) {
          sum += (i - b.i_lines.at(line)).squaredNorm();
          n += 3;
        }
      }
    }
    CHECK(sum / static_cast<double>(n) == doctest::Approx(1e-4).epsilon(0.05));
  }

  TEST_CASE("events take effect on [start, end)") {
    const auto f = branch_toy();
    auto sc = toy_scenario();
    sc.events.push_back({EventKind::LoadLoss, 3, {}, model::PhaseMask::all(), false, 100, 200, 0.0});
    CHECK(state_at(sc, f, 99).loads.at(3) == sc.loads.at(3));
    CHECK(state_at(sc, f, 100).loads.at(3).isZero());
    CHECK(state_at(sc, f, 199).loads.at(3).isZero());
    CHECK(state_at(sc, f, 200).loads.at(3) == sc.loads.at(3));
    CHECK(state_at(sc, f, 150).loads.at(4) == sc.loads.at(4));
  }

  TEST_CASE("an open phase carries no current") {
    const auto f = branch_toy();
    auto sc = toy_scenario();
    sc.events.push_back({EventKind::FuseOpen, {}, std::string("2-3"), model::PhaseMask::parse("b"), true, 100, 200, 0.0});
    const auto st = state_at(sc, f, 150);
    const auto sol = solve_network(f, st, 1.0);
    const auto* line = f.find_line("2-3");
    REQUIRE(line != nullptr);
    for (const BusId end : {2, 3}) {
      const Vec3c i = line_current(f, *line, end, st, sol.V);
      CHECK(std::abs(i(1)) < 1e-12);
      CHECK(std::abs(i(0)) > 1e-3);
    }
  }

  TEST_CASE("load loss changes the lost branch far more than its sibling") {
    const auto f = branch_toy();
    auto sc = toy_scenario();
    sc.events.push_back({EventKind::LoadLoss, 3, {}, model::PhaseMask::all(), false, 100, 200, 0.0});
    const auto sim = generate(sc, f);
    const auto& before = sim.streams.at(2)[50];
    const auto& during = sim.streams.at(2)[150];
    const double own = (during.i_lines.at("2-3") - before.i_lines.at("2-3")).norm() / before.i_lines.at("2-3").norm();
    const double sibling = (during.i_lines.at("2-4") - before.i_lines.at("2-4")).norm() / before.i_lines.at("2-4").norm();
    CHECK(own > 0.9);
    CHECK(sibling < 0.05);
  }

  TEST_CASE("transitions blend over two samples") {
    const auto f = branch_toy();
    auto sc = toy_scenario();
    sc.events.push_back({EventKind::LoadLoss, 3, {}, model::PhaseMask::all(), false, 100, 200, 0.0});
    const auto sim = generate(sc, f);
    const auto& s = sim.streams.at(3);
    const Vec3c a = s[99].i_lines.at("2-3"), b = s[102].i_lines.at("2-3");
    CHECK((s[100].i_lines.at("2-3") - (0.25 * b + 0.75 * a)).norm() < 1e-12);
    CHECK((s[101].i_lines.at("2-3") - (0.75 * b + 0.25 * a)).norm() < 1e-12);
  }

  TEST_CASE("same seed gives byte-identical CSV; another seed does not") {
    auto sc = quiet_scenario();
    sc.noise_sigma = 1e-3;
    const auto a = generate(sc, test::ieee34());
    const auto b = generate(sc, test::ieee34());
    sc.seed += 1;
    const auto c = generate(sc, test::ieee34());
    CHECK(csv_of(a.streams.at(7)) == csv_of(b.streams.at(7)));
    CHECK(csv_of(a.streams.at(7)) != csv_of(c.streams.at(7)));
  }

  TEST_CASE("CSV round trip is exact") {
    auto sc = quiet_scenario();
    sc.noise_sigma = 1e-3;
    const auto sim = generate(sc, test::ieee34());
    const auto dir = test::scratch_dir("csv");
    write_stream_csv(dir / "s.csv", sim.streams.at(19));
    const auto back = read_stream_csv(dir / "s.csv", 19);
    CHECK(back.skipped_rows == 0);
    CHECK(back.frames == sim.streams.at(19));
    std::ifstream in(dir / "s.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == kStreamHeader);
  }

  TEST_CASE("malformed CSV rows are skipped and counted") {
    std::vector<analytics::PhasorFrame> frames(3);
    for (int k = 0; k < 3; ++k) {
      frames[k].k = k;
      frames[k].bus = 5;
      frames[k].v = Vec3c::Constant(Complex(1.0, 0.1 * k));
      frames[k].i_lines["4-5"] = Vec3c::Constant(Complex(0.2, -0.1));
    }
    std::string text = csv_of(frames);
    text += "3,t,1,0,1,0,1,nan-ish,4-5,0,0,0,0,0,0\n";
    text += "4,t,1,0\n";
    text += "not,a,row\n";
    std::istringstream in(text);
    const auto r = read_stream_csv(in, 5);
    CHECK(r.skipped_rows == 3);
    CHECK(r.frames == frames);
  }

  TEST_CASE("replay attack repeats the window before the start and keeps k") {
    auto sc = quiet_scenario();
    sc.noise_sigma = 1e-3;
    const auto sim = generate(sc, test::ieee34());
    const auto& s = sim.streams.at(19);
    const auto r = apply_replay_attack(s, 80, 100, 12);
    REQUIRE(r.size() == s.size());
    for (std::size_t k = 0; k < s.size(); ++k) {
      CHECK(r[k].k == s[k].k);
      if (k < 80 || k > 100) {
        CHECK(r[k] == s[k]);
      } else {
        const auto& src = s[68 + (k - 80) % 12];
        CHECK(r[k].v == src.v);
        CHECK(r[k].i_lines == src.i_lines);
      }
    }
    const auto all = apply_replay_attack(sim.streams, 19, 80, 100, 12);
    CHECK(all.at(7) == sim.streams.at(7));
    CHECK(all.at(19) == r);
  }

  TEST_CASE("a replay event tampers only the uplink") {
    auto sc = load_scenario(test::data_path("scenarios/slgf.json"));
    sc.duration_s = 2.0;
    sc.events.clear();
    const auto plain = generate(sc, test::ieee34());
    sc.events.push_back({EventKind::ReplayAttack, 31, {}, model::PhaseMask::all(), false, 100, 150, 0.0});
    const auto sim = generate(sc, test::ieee34());
    CHECK(sim.streams == plain.streams);
    REQUIRE(sim.uplink.size() == 1);
    CHECK(sim.uplink.at(31) == apply_replay_attack(plain.streams.at(31), 100, 150, sc.replay_window));
    const auto view = central_view(sim);
    CHECK(view.at(31) == sim.uplink.at(31));
    CHECK(view.at(7) == sim.streams.at(7));
    CHECK(sim.truth.events.size() == 1);
  }

  TEST_CASE("ground truth round-trips through JSON") {
    const auto sc = load_scenario(test::data_path("scenarios/slgf.json"));
    auto brief = sc;
    brief.duration_s = 0.5;
    brief.events.clear();
    GroundTruth gt;
    gt.scenario = "slgf";
    for (const auto& e : sc.events) gt.events.push_back({e, {25, 26}, {"25-26"}, {"current_mag"}});
    const auto back = ground_truth_from_json(to_json(gt));
    REQUIRE(back.events.size() == gt.events.size());
    CHECK(back.events[0].event.kind == EventKind::SLGFault);
    CHECK(back.events[1].affected_lines == std::vector<std::string>{"25-26"});
    CHECK_THROWS_AS(ground_truth_from_json(nlohmann::json::object()), DataError);
  }

  TEST_CASE("scenario validation") {
    const auto f = branch_toy();
    auto check_bad = [&](Event e, const std::string& needle) {
      auto sc = toy_scenario();
      sc.events.push_back(e);
      try {
        validate_scenario(sc, f);
        FAIL("expected a validation error for " << needle);
      } catch (const ValidationError& err) {
        CHECK(std::string(err.what()).find(needle) != std::string::npos);
      }
    };
    check_bad({EventKind::LoadLoss, 9, {}, model::PhaseMask::all(), false, 10, 20, 0.0}, "unknown bus");
    check_bad({EventKind::FuseOpen, {}, std::string("7-8"), model::PhaseMask::all(), false, 10, 20, 0.0}, "unknown line");
    check_bad({EventKind::SLGFault, {}, std::string("2-3"), model::PhaseMask::parse("ab"), true, 10, 20, 0.0}, "one faulted phase");
    check_bad({EventKind::ReplayAttack, 3, {}, model::PhaseMask::all(), false, 30, 90, 0.0}, "warmup");
    check_bad({EventKind::ReplayAttack, 1, {}, model::PhaseMask::all(), false, 100, 190, 0.0}, "sensor bus");
    check_bad({EventKind::LoadLoss, 3, {}, model::PhaseMask::all(), false, 20, 20, 0.0}, "precede");

    auto sc = toy_scenario();
    sc.events.push_back({EventKind::LoadLoss, 3, {}, model::PhaseMask::all(), false, 50, 60, 0.0});
    sc.events.push_back({EventKind::LoadLoss, 4, {}, model::PhaseMask::all(), false, 40, 60, 0.0});
    CHECK_THROWS_WITH_AS(validate_scenario(sc, f), doctest::Contains("time order"), ValidationError);

    sc = toy_scenario();
    sc.noise_sigma = -1.0;
    CHECK_THROWS_AS(validate_scenario(sc, f), ValidationError);
    CHECK_THROWS_AS(load_scenario("/nonexistent/x.json"), DataError);
  }

  TEST_CASE("bundled scenarios validate") {
    for (const auto* name : {"quiet", "slgf", "loadloss24", "slgf_replay_minor", "slgf_replay_dominant", "slgf_replay_two"}) {
      const auto sc = load_scenario(test::data_path(std::string("scenarios/") + name + ".json"));
      CHECK_NOTHROW(validate_scenario(sc, model::load_feeder(sc.feeder_path)));
    }
  }
}
