// SPDX-License-Identifier: Apache-2.0
#include "support.hpp"

#include "gridwatch/cli/app.hpp"
#include "gridwatch/cli/config.hpp"
#include "gridwatch/error.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace gridwatch;
using namespace gridwatch::cli;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run gw(std::vector<std::string> args) {
  args.insert(args.begin(), "gridwatch");
  std::ostringstream out, err;
  Run r;
  r.code = run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
  return p;
}

// Scenario `name` shortened to `seconds`, written next to its feeder path.
fs::path short_scenario(const std::string& name, double seconds, const fs::path& dir) {
  std::ifstream in(test::data_path("scenarios/" + name + ".json"));
  auto doc = nlohmann::json::parse(in);
  doc["duration_s"] = seconds;
  doc["feeder"] = test::data_path("feeders/ieee34.feeder").string();
  return write_file(dir / (name + ".json"), doc.dump());
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("config file over defaults") {
    const auto dir = test::scratch_dir("cfg");
    const auto path = write_file(dir / "a.ini",
                                 "# comment\n[detector]\nh = 8\n; other\n[network]\nport = 9000\nwire = json\n");
    const auto c = load_config(path);
    CHECK(c.pipeline.local.detector.h == 8.0);
    CHECK(c.pipeline.central.detector.h == 8.0);
    CHECK(c.port == 9000);
    CHECK(c.wire == transport::Wire::Json);
    CHECK(c.pipeline.local.detector.nu == Config{}.pipeline.local.detector.nu);
  }

  TEST_CASE("config errors") {
    const auto dir = test::scratch_dir("cfg_bad");
    CHECK_THROWS_WITH_AS(load_config(write_file(dir / "u.ini", "[detector]\nhh = 1\n")),
                         doctest::Contains("detector.hh"), ConfigError);
    CHECK_THROWS_AS(load_config(write_file(dir / "s.ini", "[nosuch]\nx = 1\n")), ConfigError);
    CHECK_THROWS_AS(load_config(write_file(dir / "n.ini", "[detector]\nh = big\n")), ConfigError);
    CHECK_THROWS_WITH_AS(load_config(write_file(dir / "r.ini", "[detector]\nlambda_forget = 1.5\n")),
                         doctest::Contains("lambda_forget"), ConfigError);
    CHECK_THROWS_AS(load_config(write_file(dir / "v.ini", "[voltage]\nsag = 0.05\n")), ConfigError);
    CHECK_THROWS_AS(load_config(write_file(dir / "p.ini", "[network]\nport = 70000\n")), ConfigError);
    CHECK_THROWS_AS(load_config(write_file(dir / "o.ini", "h = 1\n")), ConfigError);
    CHECK_THROWS_AS(load_config(dir / "missing.ini"), ConfigError);
  }

  TEST_CASE("overrides apply in order and are validated") {
    Config c;
    apply_overrides(c, {"segment.t1=30", "segment.t1=40", "network.straggler_s=0.5"});
    CHECK(c.pipeline.local.segment.quiet_close == 40);
    CHECK(c.pipeline.central.segment.quiet_close == 40);
    CHECK(c.align.straggler_s == 0.5);
    CHECK_THROWS_AS(apply_overrides(c, {"segment.t1"}), ConfigError);
    CHECK_THROWS_AS(apply_overrides(c, {"local.window_m=1"}), ConfigError);
    CHECK_THROWS_AS(apply_overrides(c, {"bogus.key=1"}), ConfigError);
  }

  TEST_CASE("dump reads back to the same configuration") {
    Config c;
    apply_overrides(c, {"detector.nu=0.3", "voltage.swell=1.12", "paths.spool_dir=/tmp/x", "network.wire=json"});
    const auto dir = test::scratch_dir("cfg_dump");
    const auto text = dump_config(c);
    CHECK(dump_config(load_config(write_file(dir / "d.ini", text))) == text);
    CHECK(dump_config(Config{}) == dump_config(load_config(write_file(dir / "e.ini", ""))));
  }

  TEST_CASE("exit codes") {
    CHECK(gw({}).code == kUsage);
    CHECK(gw({"nosuch"}).code == kUsage);
    CHECK(gw({"--help"}).code == kOk);
    CHECK(gw({"place", "--k", "0"}).code == kConfig);
    CHECK(gw({"place", "--solver", "annealing"}).code == kConfig);
    CHECK(gw({"config", "--set", "detector.h=-1"}).code == kConfig);
    CHECK(gw({"place", "--feeder", "/nonexistent.feeder"}).code == kData);
    const auto empty = test::scratch_dir("cli_empty");
    CHECK(gw({"analyze", "--in", empty.string(), "--out", (empty / "o").string()}).code == kData);
    const auto r = gw({"serve-local", "--stream", write_file(empty / "s.csv", "").string(), "--feeder", "ieee34",
                       "--bus", "7", "--connect", "127.0.0.1:1", "--set", "network.give_up_s=0.2"});
    CHECK(r.code == kNetwork);
    CHECK_FALSE(r.err.empty());
  }

  TEST_CASE("place prints the greedy set") {
    const auto r = gw({"place", "--solver", "greedy"});
    CHECK(r.code == kOk);
    CHECK(r.out.find("8,20,31") != std::string::npos);
    const auto j = gw({"place", "--solver", "greedy", "--json"});
    const auto doc = nlohmann::json::parse(j.out);
    CHECK(doc[0]["buses"] == nlohmann::json({8, 20, 31}));
    CHECK(doc[0]["evaluations"] == 34 + 33 + 32);
  }

  TEST_CASE("simulate, analyze and report on a fault") {
    const auto dir = test::scratch_dir("cli_slgf");
    const auto sc = short_scenario("slgf", 8.0, dir);
    REQUIRE(gw({"simulate", "--scenario", sc.string(), "--out", (dir / "sim").string()}).code == kOk);
    const auto m = read_manifest(dir / "sim");
    CHECK(m.sensors == std::vector<BusId>{7, 19, 31});
    CHECK(m.streams.size() == 3);
    REQUIRE(gw({"analyze", "--in", (dir / "sim").string(), "--out", (dir / "a1").string()}).code == kOk);
    REQUIRE(gw({"analyze", "--in", (dir / "sim").string(), "--out", (dir / "a2").string()}).code == kOk);
    for (const auto* f : {"eventlog.jsonl", "central_metric.csv", "derived_19.csv"}) {
      CHECK(slurp(dir / "a1" / f) == slurp(dir / "a2" / f));
    }
    CHECK(slurp(dir / "a1" / "central_metric.csv").rfind("k,x,ratio\n", 0) == 0);
    const auto r = gw({"report", "--eventlog", (dir / "a1" / "eventlog.jsonl").string(), "--groundtruth",
                       (dir / "sim" / "groundtruth.json").string(), "--json"});
    REQUIRE(r.code == kOk);
    const auto s = nlohmann::json::parse(r.out);
    CHECK(s["hits"] == 2);
    CHECK(s["misses"] == 0);
  }

  TEST_CASE("a quiet feeder raises nothing") {
    const auto dir = test::scratch_dir("cli_quiet");
    const auto sc = short_scenario("quiet", 6.0, dir);
    REQUIRE(gw({"simulate", "--scenario", sc.string(), "--out", (dir / "sim").string()}).code == kOk);
    REQUIRE(gw({"analyze", "--in", (dir / "sim").string(), "--out", (dir / "a").string()}).code == kOk);
    CHECK(slurp(dir / "a" / "eventlog.jsonl").empty());
  }

  TEST_CASE("the seed reaches the streams") {
    const auto dir = test::scratch_dir("cli_seed");
    const auto sc = short_scenario("slgf", 1.0, dir);
    const auto sim = [&](const std::string& name, const std::string& seed) {
      std::vector<std::string> a{"simulate", "--scenario", sc.string(), "--out", (dir / name).string()};
      if (!seed.empty()) a.insert(a.end(), {"--seed", seed});
      REQUIRE(gw(a).code == kOk);
      return slurp(dir / name / read_manifest(dir / name).streams.at(19));
    };
    const auto base = sim("a", "");
    CHECK(read_manifest(dir / "a").seed == 34);
    CHECK(sim("b", "") == base);
    CHECK(sim("c", "5") != base);
    CHECK(read_manifest(dir / "c").seed == 5);
    CHECK(sim("d", "5") == sim("c", "5"));
  }

  TEST_CASE("score matching") {
    synth::GroundTruth truth;
    synth::Event e;
    e.kind = synth::EventKind::LoadLoss;
    e.bus = 24;
    e.start_k = 100;
    e.end_k = 200;
    truth.events.push_back({e, {24}, {}, {}});
    central::EventLog log;
    analytics::AnomalyReport near;
    near.bus = 19;
    near.start_k = 205;
    near.end_k = 210;
    analytics::AnomalyReport far = near;
    far.start_k = 500;
    far.end_k = 520;
    log = central::fuse_reports({near, far}, {});
    auto s = score(log, truth, 14);
    CHECK(s.hits == 1);
    CHECK(s.false_alarms == 1);
    CHECK(s.incidents == 2);
    s = score(log, truth, 2);
    CHECK(s.hits == 0);
    CHECK(s.misses == 1);
    CHECK(s.false_alarms == 2);
  }
}
