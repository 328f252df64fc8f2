// SPDX-License-Identifier: Apache-2.0
#include "support.hpp"

#include "gridwatch/central/pipeline.hpp"
#include "gridwatch/error.hpp"
#include "gridwatch/transport/net.hpp"

#include <boost/asio.hpp>
#include <doctest.h>

#include <future>
#include <mutex>
#include <thread>

using namespace gridwatch;
using namespace gridwatch::transport;
namespace asio = boost::asio;
using asio::ip::tcp;

namespace {

struct Fixture {
  synth::SimulationResult sim;
  model::Placement placement{{7, 19, 31}};
  central::PipelineResult offline;

  explicit Fixture(double seconds) {
    auto sc = synth::load_scenario(test::data_path("scenarios/slgf.json"));
    sc.duration_s = seconds;
    sim = synth::generate(sc, test::ieee34());
    offline = central::run_offline(test::ieee34(), test::ieee34_system(), placement, sim.streams,
                                   synth::central_view(sim), {});
  }
};

analytics::LocalConfig local_config(BusId bus) {
  analytics::LocalConfig cfg;
  cfg.ratings = central::ratings_for(test::ieee34(), bus);
  return cfg;
}

/// Runs the central node on a free port in a background thread.
class CentralThread {
 public:
  explicit CentralThread(CentralNodeOptions opt, const model::Placement& placement) {
    opt.port = 0;
    opt.on_listening = [this](std::uint16_t p) { port_.set_value(p); };
    result_ = std::async(std::launch::async, [opt, placement] {
      return serve_central(test::ieee34_system(), placement, {}, opt);
    });
    port = port_.get_future().get();
  }
  CentralNodeResult get() { return result_.get(); }

  std::uint16_t port = 0;

 private:
  std::promise<std::uint16_t> port_;
  std::future<CentralNodeResult> result_;
};

/// TCP relay that can drop every connection and refuse new ones for a while.
class Proxy {
 public:
  explicit Proxy(std::uint16_t upstream)
      : upstream_(upstream), acceptor_(io_, tcp::endpoint(asio::ip::make_address("127.0.0.1"), 0)) {
    port = acceptor_.local_endpoint().port();
    accept();
    thread_ = std::thread([this] { io_.run(); });
  }
  ~Proxy() {
    asio::post(io_, [this] {
      boost::system::error_code ec;
      acceptor_.close(ec);
      drop_all();
      io_.stop();
    });
    thread_.join();
  }

  /// Closes every relayed connection and refuses new ones for `seconds`.
  void cut(double seconds) {
    std::promise<void> done;
    asio::post(io_, [&] {
      blocked_until_ = std::chrono::steady_clock::now() + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                                              std::chrono::duration<double>(seconds));
      drop_all();
      ++cuts;
      done.set_value();
    });
    done.get_future().get();
  }

  std::uint16_t port = 0;
  std::atomic<std::uint64_t> bytes{0};
  std::atomic<int> cuts{0};
  std::atomic<int> refused{0};

 private:
  struct Pipe {
    explicit Pipe(tcp::socket s, asio::io_context& io) : a(std::move(s)), b(io) {}
    tcp::socket a, b;
    std::array<char, 8192> ab{}, ba{};
  };

  void accept() {
    acceptor_.async_accept([this](boost::system::error_code ec, tcp::socket s) {
      if (ec) return;
      if (std::chrono::steady_clock::now() < blocked_until_) {
        ++refused;
        s.close(ec);
      } else {
        auto p = std::make_shared<Pipe>(std::move(s), io_);
        p->b.connect(tcp::endpoint(asio::ip::make_address("127.0.0.1"), upstream_), ec);
        if (!ec) {
          pipes_.push_back(p);
          pump(p, p->a, p->b, p->ab);
          pump(p, p->b, p->a, p->ba);
        }
      }
      accept();
    });
  }

  void pump(std::shared_ptr<Pipe> p, tcp::socket& from, tcp::socket& to, std::array<char, 8192>& buf) {
    from.async_read_some(asio::buffer(buf), [this, p, &from, &to, &buf](boost::system::error_code ec, std::size_t n) {
      if (ec) return close(*p);
      bytes += n;
      asio::async_write(to, asio::buffer(buf.data(), n), [this, p, &from, &to, &buf](boost::system::error_code ec2, std::size_t) {
        if (ec2) return close(*p);
        pump(p, from, to, buf);
      });
    });
  }

  static void close(Pipe& p) {
    boost::system::error_code ec;
    p.a.close(ec);
    p.b.close(ec);
  }

  void drop_all() {
    for (auto& p : pipes_) close(*p);
    pipes_.clear();
  }

  std::uint16_t upstream_;
  asio::io_context io_;
  tcp::acceptor acceptor_;
  std::vector<std::shared_ptr<Pipe>> pipes_;
  std::chrono::steady_clock::time_point blocked_until_{};
  std::thread thread_;
};

struct Sensors {
  std::vector<std::future<LocalNodeResult>> runs;

  Sensors(const Fixture& fx, std::uint16_t port, const std::vector<BusId>& buses, LocalNodeOptions opt = {}) {
    opt.port = port;
    for (const BusId b : buses) {
      const auto* uplink = fx.sim.uplink.contains(b) ? &fx.sim.uplink.at(b) : nullptr;
      runs.push_back(std::async(std::launch::async, [&fx, b, uplink, opt] {
        return serve_local(b, local_config(b), fx.sim.streams.at(b), uplink, opt);
      }));
    }
  }
  std::vector<LocalNodeResult> get() {
    std::vector<LocalNodeResult> out;
    for (auto& r : runs) out.push_back(r.get());
    return out;
  }
};

}  // namespace

TEST_SUITE("net") {
  TEST_CASE("networked event log equals the in-process one") {
    const Fixture fx(6.0);
    CentralThread central({}, fx.placement);
    Sensors sensors(fx, central.port, {7, 19, 31});
    const auto locals = sensors.get();
    const auto r = central.get();
    CHECK(central::to_jsonl(r.log) == central::to_jsonl(fx.offline.log));
    CHECK(r.central.x == fx.offline.central.x);
    CHECK(r.central.gaps == fx.offline.central.gaps);
    for (const auto& [bus, s] : r.sessions) {
      CHECK(s.status == Status::Finished);
      CHECK(s.gaps == 0);
      CHECK(s.late == 0);
    }
    for (std::size_t i = 0; i < locals.size(); ++i) {
      CHECK(locals[i].reports == fx.offline.local.at(fx.placement.buses()[i]));
      CHECK(locals[i].connections == 1);
    }
  }

  TEST_CASE("a one-second outage loses no reports and no frames") {
    const Fixture fx(6.0);
    CentralNodeOptions copt;
    CentralThread central(copt, fx.placement);
    Proxy proxy(central.port);
    LocalNodeOptions lopt;
    lopt.rate = 2.0;  // 3 s of traffic
    Sensors sensors(fx, proxy.port, {7, 19, 31}, lopt);
    std::this_thread::sleep_for(std::chrono::milliseconds(800));
    REQUIRE(proxy.bytes.load() > 0);
    proxy.cut(1.0);
    const auto locals = sensors.get();
    const auto r = central.get();
    CHECK(proxy.cuts.load() == 1);
    MESSAGE("connections refused during the outage: " << proxy.refused.load());
    CHECK(proxy.refused.load() > 0);
    for (const auto& l : locals) CHECK(l.connections >= 2);
    CHECK(central::to_jsonl(r.log) == central::to_jsonl(fx.offline.log));
    CHECK(r.central.x == fx.offline.central.x);
    std::size_t reports = 0;
    for (const auto& [bus, rs] : fx.offline.local) reports += rs.size();
    CHECK(r.reports.size() == reports);
    for (const auto& [bus, s] : r.sessions) {
      CHECK(s.status == Status::Finished);
      CHECK(s.gaps == 0);
      CHECK(s.late == 0);
    }
  }

  TEST_CASE("an unknown sensor is rejected") {
    const Fixture fx(1.0);
    CentralNodeOptions copt;
    copt.idle_timeout_s = 0.5;
    CentralThread central(copt, fx.placement);
    LocalNodeOptions lopt;
    lopt.port = central.port;
    analytics::PhasorFrame f = fx.sim.streams.at(7).front();
    f.bus = 8;
    CHECK_THROWS_WITH_AS(serve_local(8, {}, {f}, nullptr, lopt), doctest::Contains("rejected"), NetworkError);
    const auto r = central.get();
    CHECK(r.rejected_sessions == 1);
    for (const auto& [bus, s] : r.sessions) CHECK(s.status == Status::Never);
  }

  TEST_CASE("a sensor that never connects leaves the others' reports intact") {
    const Fixture fx(3.0);
    CentralNodeOptions copt;
    copt.idle_timeout_s = 0.5;
    CentralThread central(copt, fx.placement);
    Sensors sensors(fx, central.port, {7, 19});
    sensors.get();
    const auto r = central.get();
    CHECK(r.sessions.at(31).status == Status::Never);
    CHECK_FALSE(r.sessions.at(31).last_k.has_value());
    CHECK(r.sessions.at(7).status == Status::Finished);
    std::size_t expected = fx.offline.local.at(7).size() + fx.offline.local.at(19).size();
    CHECK(r.reports.size() == expected);
    // No sample is complete without bus 31.
    CHECK(r.central.x.empty());
  }

  TEST_CASE("unreachable central side gives up with a network error") {
    LocalNodeOptions lopt;
    lopt.port = 1;  // nothing listens there
    lopt.give_up_s = 0.3;
    analytics::PhasorFrame f;
    f.bus = 7;
    f.v = Vec3c::Constant(1.0);
    CHECK_THROWS_AS(serve_local(7, {}, {f}, nullptr, lopt), NetworkError);
  }

  TEST_CASE("JSON wire mode gives the same log") {
    const Fixture fx(3.0);
    CentralNodeOptions copt;
    copt.wire = Wire::Json;
    CentralThread central(copt, fx.placement);
    LocalNodeOptions lopt;
    lopt.wire = Wire::Json;
    Sensors sensors(fx, central.port, {7, 19, 31}, lopt);
    sensors.get();
    const auto r = central.get();
    CHECK(central::to_jsonl(r.log) == central::to_jsonl(fx.offline.log));
    CHECK(r.central.x == fx.offline.central.x);
  }

  TEST_CASE("a tampered uplink reaches the central side, not the local engine") {
    auto sc = synth::load_scenario(test::data_path("scenarios/slgf_replay_minor.json"));
    sc.duration_s = 4.0;
    Fixture fx(1.0);
    fx.sim = synth::generate(sc, test::ieee34());
    fx.offline = central::run_offline(test::ieee34(), test::ieee34_system(), fx.placement, fx.sim.streams,
                                      synth::central_view(fx.sim), {});
    REQUIRE_FALSE(fx.sim.uplink.empty());
    CentralThread central({}, fx.placement);
    Sensors sensors(fx, central.port, {7, 19, 31});
    sensors.get();
    const auto r = central.get();
    CHECK(central::to_jsonl(r.log) == central::to_jsonl(fx.offline.log));
    CHECK(r.central.x == fx.offline.central.x);
  }
}
