// SPDX-License-Identifier: Apache-2.0
#include "gridwatch/transport/net.hpp"

#include "gridwatch/central/eventlog.hpp"

#include <boost/asio.hpp>
#include <poll.h>

#include <algorithm>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <limits>
#include <mutex>
#include <thread>
#include <variant>

namespace gridwatch::transport {

namespace asio = boost::asio;
using asio::ip::tcp;
using namespace std::chrono_literals;

namespace {

// Waits for `fd` to become readable; true when it is.
bool wait_readable(int fd, std::chrono::milliseconds timeout) {
  pollfd p{fd, POLLIN, 0};
  const int r = ::poll(&p, 1, static_cast<int>(timeout.count()));
  if (r < 0) {
    if (errno == EINTR) return false;
    throw NetworkError(std::string("poll: ") + std::strerror(errno));
  }
  return r > 0;
}

void sleep_s(double s) {
  if (s > 0) std::this_thread::sleep_for(std::chrono::duration<double>(s));
}

}  // namespace

Wire wire_from_string(std::string_view text) {
  if (text == "binary") return Wire::Binary;
  if (text == "json") return Wire::Json;
  throw ConfigError("unknown wire format '" + std::string(text) + "' (binary|json)");
}

double monotonic_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

struct Connection::Impl {
  std::shared_ptr<asio::io_context> io;
  tcp::socket socket;
  Wire wire;
  std::vector<std::uint8_t> buffer;

  Impl(std::shared_ptr<asio::io_context> ctx, tcp::socket s, Wire w)
      : io(std::move(ctx)), socket(std::move(s)), wire(w) {}

  // A complete message from the front of the buffer, if one is there.
  std::optional<Message> extract() {
    if (wire == Wire::Json) {
      const auto nl = std::find(buffer.begin(), buffer.end(), std::uint8_t{'\n'});
      if (nl == buffer.end()) {
        if (buffer.size() > kMaxMessageBytes) throw DecodeError(DecodeErrc::TooLarge, "json line");
        return std::nullopt;
      }
      const std::string line(buffer.begin(), nl);
      buffer.erase(buffer.begin(), nl + 1);
      return decode_json(line);
    }
    const auto size = peek_message_size(buffer);
    if (!size || buffer.size() < *size) return std::nullopt;
    auto m = decode(std::span(buffer).first(*size));
    buffer.erase(buffer.begin(), buffer.begin() + static_cast<std::ptrdiff_t>(*size));
    return m;
  }
};

Connection::Connection(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
Connection::Connection(Connection&&) noexcept = default;
Connection& Connection::operator=(Connection&&) noexcept = default;
Connection::~Connection() { close(); }

Connection Connection::connect(const std::string& host, std::uint16_t port, Wire wire) {
  auto io = std::make_shared<asio::io_context>();
  tcp::socket socket(*io);
  boost::system::error_code ec;
  tcp::resolver resolver(*io);
  const auto endpoints = resolver.resolve(host, std::to_string(port), ec);
  if (!ec) asio::connect(socket, endpoints, ec);
  if (ec) {
    throw NetworkError("cannot connect to " + host + ":" + std::to_string(port) + ": " + ec.message());
  }
  socket.set_option(tcp::no_delay(true), ec);
  return Connection(std::make_unique<Impl>(std::move(io), std::move(socket), wire));
}

void Connection::send(const Message& m) {
  if (!is_open()) throw NetworkError("send on a closed connection");
  boost::system::error_code ec;
  if (impl_->wire == Wire::Json) {
    const auto text = encode_json(m) + "\n";
    asio::write(impl_->socket, asio::buffer(text), ec);
  } else {
    const auto bytes = encode(m);
    asio::write(impl_->socket, asio::buffer(bytes), ec);
  }
  if (ec) throw NetworkError("send: " + ec.message());
}

std::optional<Message> Connection::receive(std::chrono::milliseconds timeout) {
  if (!is_open()) throw NetworkError("receive on a closed connection");
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (true) {
    try {
      if (auto m = impl_->extract()) return m;
    } catch (const DecodeError& e) {
      throw NetworkError(std::string("corrupt stream: ") + e.what());
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (!wait_readable(impl_->socket.native_handle(), std::max(left, 0ms))) {
      if (std::chrono::steady_clock::now() >= deadline) return std::nullopt;
      continue;
    }
    std::uint8_t chunk[65536];
    boost::system::error_code ec;
    const auto n = impl_->socket.read_some(asio::buffer(chunk), ec);
    if (ec) throw NetworkError("receive: " + ec.message());
    impl_->buffer.insert(impl_->buffer.end(), chunk, chunk + n);
  }
}

void Connection::close() {
  if (!impl_ || !impl_->socket.is_open()) return;
  boost::system::error_code ec;
  impl_->socket.shutdown(tcp::socket::shutdown_both, ec);
  impl_->socket.close(ec);
}

bool Connection::is_open() const { return impl_ && impl_->socket.is_open(); }

// ---------------------------------------------------------------- local side

namespace {

Message hello_from_sensor(BusId sensor, std::uint64_t reports, SampleIndex k) {
  Message m;
  m.sensor_id = static_cast<std::uint32_t>(sensor);
  m.k = k;
  m.body = HelloBody{Role::Sensor, reports};
  return m;
}

std::optional<SampleIndex> resume_point(SampleIndex k) {
  return k >= 0 ? std::optional<SampleIndex>(k) : std::nullopt;
}

class Uplink {
 public:
  Uplink(BusId sensor, const LocalNodeOptions& opt, Outbox& box)
      : sensor_(sensor), opt_(opt), box_(box), down_since_(monotonic_seconds()) {}

  int connections() const { return connections_; }
  std::uint64_t frames_sent = 0;
  std::uint64_t reports_sent = 0;

  /// Sends up to `budget` queued messages and handles acknowledgements.
  void pump(std::uint64_t reports_made, SampleIndex last_k, std::size_t budget) {
    if (!ensure(reports_made, last_k)) return;
    try {
      for (std::size_t i = 0; i < budget; ++i) {
        auto m = box_.next();
        if (!m) break;
        conn_->send(*m);
        (m->kind() == Kind::Report ? reports_sent : frames_sent) += 1;
      }
      while (auto in = conn_->receive(0ms)) handle(*in);
      const double now = monotonic_seconds();
      if (now - last_heartbeat_ >= opt_.heartbeat_s) {
        Message hb;
        hb.sensor_id = static_cast<std::uint32_t>(sensor_);
        hb.k = last_k;
        hb.body = HeartbeatBody{reports_made};
        conn_->send(hb);
        last_heartbeat_ = now;
      }
    } catch (const NetworkError&) {
      drop();
    }
  }

  /// Waits briefly for acknowledgements.
  void wait(std::chrono::milliseconds timeout) {
    if (!conn_) {
      std::this_thread::sleep_for(std::min(timeout, 5ms));
      return;
    }
    try {
      if (auto in = conn_->receive(timeout)) handle(*in);
    } catch (const NetworkError&) {
      drop();
    }
  }

  /// Ends the session once the central side confirms. False when the link
  /// broke; the caller pumps again and retries.
  bool bye(std::uint64_t reports_made, SampleIndex last_k) {
    if (!ensure(reports_made, last_k)) return false;
    try {
      Message m;
      m.sensor_id = static_cast<std::uint32_t>(sensor_);
      m.k = last_k;
      m.body = ByeBody{ByeReason::Finished, reports_made};
      conn_->send(m);
      const double until = monotonic_seconds() + 5.0;
      while (monotonic_seconds() < until) {
        auto in = conn_->receive(50ms);
        if (!in) continue;
        if (in->kind() == Kind::Bye) {
          conn_->close();
          conn_.reset();
          return true;
        }
        handle(*in);
      }
      drop();
    } catch (const NetworkError&) {
      drop();
    }
    return false;
  }

 private:
  bool ensure(std::uint64_t reports_made, SampleIndex last_k) {
    if (conn_) return true;
    const double now = monotonic_seconds();
    if (opt_.stop && opt_.stop->load() && now - down_since_ > 1.0) {
      throw NetworkError("stopped while the central side was unreachable");
    }
    if (now < next_attempt_) return false;
    try {
      auto c = Connection::connect(opt_.host, opt_.port, opt_.wire);
      c.send(hello_from_sensor(sensor_, reports_made, last_k));
      auto reply = c.receive(2000ms);
      if (!reply) throw NetworkError("no handshake reply");
      if (reply->kind() == Kind::Bye) {
        throw ConfigError("central side rejected sensor " + std::to_string(sensor_));
      }
      if (reply->kind() != Kind::Hello) throw NetworkError("unexpected handshake reply");
      box_.acknowledge(std::get<HelloBody>(reply->body).reports, resume_point(reply->k));
      box_.rewind();
      conn_ = std::move(c);
      ++connections_;
      last_heartbeat_ = 0.0;
      return true;
    } catch (const ConfigError& e) {
      throw NetworkError(e.what());
    } catch (const NetworkError&) {
      next_attempt_ = now + opt_.reconnect_s;
      if (now - down_since_ > opt_.give_up_s) {
        throw NetworkError("central side unreachable at " + opt_.host + ":" +
                           std::to_string(opt_.port));
      }
      return false;
    }
  }

  void handle(const Message& in) {
    if (in.kind() == Kind::Heartbeat) {
      box_.acknowledge(std::get<HeartbeatBody>(in.body).reports, resume_point(in.k));
    } else if (in.kind() == Kind::Bye) {
      throw NetworkError("central side closed the session");
    }
  }

  void drop() {
    if (conn_) conn_->close();
    conn_.reset();
    down_since_ = monotonic_seconds();
    next_attempt_ = down_since_ + opt_.reconnect_s;
  }

  BusId sensor_;
  const LocalNodeOptions& opt_;
  Outbox& box_;
  std::optional<Connection> conn_;
  double down_since_;
  double next_attempt_ = 0.0;
  double last_heartbeat_ = 0.0;
  int connections_ = 0;
};

}  // namespace

LocalNodeResult serve_local(BusId sensor, const analytics::LocalConfig& config,
                            const std::vector<analytics::PhasorFrame>& measured,
                            const std::vector<analytics::PhasorFrame>* uplink,
                            const LocalNodeOptions& options) {
  constexpr std::size_t kFrameBudget = 64;
  LocalNodeResult res;
  analytics::LocalEngine engine(sensor, config);
  Outbox box(options.spool);
  Uplink link(sensor, options, box);

  std::map<SampleIndex, const analytics::PhasorFrame*> forwarded;
  if (uplink) {
    for (const auto& f : *uplink) forwarded.emplace(f.k, &f);
  }

  std::uint64_t seq = 0;
  SampleIndex last_k = -1;
  auto queue_reports = [&](const std::vector<analytics::AnomalyReport>& reps) {
    for (const auto& r : reps) {
      Message m;
      m.sensor_id = static_cast<std::uint32_t>(sensor);
      m.k = r.start_k;
      m.body = ReportBody{seq++, r};
      box.push_report(std::move(m));
      res.reports.push_back(r);
    }
  };

  const double t0 = monotonic_seconds();
  for (std::size_t i = 0; i < measured.size(); ++i) {
    if (options.stop && options.stop->load()) break;
    if (options.rate > 0) {
      const double due = t0 + static_cast<double>(i) / (kSampleRateHz * options.rate);
      while (monotonic_seconds() < due) {
        link.pump(seq, last_k, kFrameBudget);
        sleep_s(std::min(due - monotonic_seconds(), 0.005));
      }
    }
    const auto& frame = measured[i];
    queue_reports(engine.push(frame));
    const auto it = forwarded.find(frame.k);
    auto out = make_frame(it != forwarded.end() ? *it->second : frame);
    out.sensor_id = static_cast<std::uint32_t>(sensor);
    box.push_frame(std::move(out));
    last_k = frame.k;
    link.pump(seq, last_k, kFrameBudget);
  }
  queue_reports(engine.finish());

  // Everything must be acknowledged before the session ends.
  const double drain_until = options.stop && options.stop->load()
                                 ? monotonic_seconds() + 2.0
                                 : std::numeric_limits<double>::infinity();
  while (true) {
    while (box.pending() > 0 && monotonic_seconds() < drain_until) {
      link.pump(seq, last_k, std::numeric_limits<std::size_t>::max());
      if (box.pending() > 0) link.wait(20ms);
    }
    if (link.bye(seq, last_k) || monotonic_seconds() >= drain_until) break;
  }
  res.frames_sent = link.frames_sent;
  res.reports_sent = link.reports_sent;
  res.connections = link.connections();
  return res;
}

// -------------------------------------------------------------- central side

namespace {

struct FrameEvent {
  analytics::PhasorFrame frame;
};
struct ReportEvent {
  BusId bus;
  analytics::AnomalyReport report;
};
struct StatusEvent {
  BusId bus;
  Status status;
};
struct HeardEvent {
  BusId bus;
};

struct Event {
  double at = 0.0;
  std::variant<FrameEvent, ReportEvent, StatusEvent, HeardEvent> what;
};

// Per-sensor resume state, shared by the session threads.
struct Resume {
  std::optional<SampleIndex> last_k;
  std::uint64_t reports = 0;
  bool active = false;
};

struct Shared {
  std::mutex mu;
  std::deque<Event> events;
  std::map<BusId, Resume> resume;
  std::atomic<bool> stopping{false};
  std::atomic<int> rejected{0};
  std::atomic<int> active{0};

  void post(Event e) {
    std::lock_guard lock(mu);
    events.push_back(std::move(e));
  }
  std::deque<Event> take() {
    std::lock_guard lock(mu);
    return std::exchange(events, {});
  }
};

Message central_message(BusId bus, SampleIndex k, Body body) {
  Message m;
  m.sensor_id = static_cast<std::uint32_t>(bus);
  m.k = k;
  m.body = std::move(body);
  return m;
}

void run_session(Connection conn, Shared& sh, const model::Placement& placement,
                 const CentralNodeOptions& opt) {
  BusId bus = -1;
  bool finished = false;
  try {
    auto hello = conn.receive(5000ms);
    if (!hello || hello->kind() != Kind::Hello ||
        std::get<HelloBody>(hello->body).role != Role::Sensor) {
      ++sh.rejected;
      return;
    }
    const auto claimed = static_cast<BusId>(hello->sensor_id);
    Resume start;
    {
      std::lock_guard lock(sh.mu);
      // Unknown sensors and a second session for a connected sensor are refused.
      if (!placement.contains(claimed) || sh.resume[claimed].active) {
        ++sh.rejected;
        conn.send(central_message(claimed, -1, ByeBody{ByeReason::Rejected, 0}));
        return;
      }
      auto& r = sh.resume[claimed];
      r.active = true;
      start = r;
    }
    bus = claimed;
    ++sh.active;
    conn.send(central_message(bus, start.last_k.value_or(-1), HelloBody{Role::Central, start.reports}));
    sh.post({monotonic_seconds(), StatusEvent{bus, Status::Connected}});

    double last_ack = monotonic_seconds();
    while (!sh.stopping.load()) {
      auto m = conn.receive(20ms);
      const double now = monotonic_seconds();
      if (m && static_cast<BusId>(m->sensor_id) == bus) {
        std::lock_guard lock(sh.mu);
        auto& r = sh.resume[bus];
        switch (m->kind()) {
          case Kind::Frame:
            if (!r.last_k || m->k > *r.last_k) r.last_k = m->k;
            sh.events.push_back({now, FrameEvent{to_phasor_frame(*m)}});
            break;
          case Kind::Report: {
            const auto& body = std::get<ReportBody>(m->body);
            if (body.seq >= r.reports) {
              r.reports = body.seq + 1;
              sh.events.push_back({now, ReportEvent{bus, body.report}});
            }
            break;
          }
          case Kind::Heartbeat:
          case Kind::Hello:
            sh.events.push_back({now, HeardEvent{bus}});
            break;
          case Kind::Bye:
            finished = true;
            sh.events.push_back({now, StatusEvent{bus, Status::Finished}});
            break;
        }
      }
      if (finished) {
        std::uint64_t reports = 0;
        {
          std::lock_guard lock(sh.mu);
          reports = sh.resume[bus].reports;
        }
        conn.send(central_message(bus, m->k, ByeBody{ByeReason::Finished, reports}));
        break;
      }
      if (now - last_ack >= opt.ack_interval_s) {
        Resume r;
        {
          std::lock_guard lock(sh.mu);
          r = sh.resume[bus];
        }
        conn.send(central_message(bus, r.last_k.value_or(-1), HeartbeatBody{r.reports}));
        last_ack = now;
      }
    }
    if (!finished) conn.send(central_message(bus, -1, ByeBody{ByeReason::Shutdown, 0}));
  } catch (const NetworkError&) {
    // Sensor went away; it resumes from the acknowledged point.
  }
  if (bus >= 0) {
    {
      std::lock_guard lock(sh.mu);
      sh.resume[bus].active = false;
    }
    --sh.active;
    if (!finished) sh.post({monotonic_seconds(), StatusEvent{bus, Status::Disconnected}});
  }
}

}  // namespace

CentralNodeResult serve_central(const model::SystemMatrix& system, const model::Placement& placement,
                                const central::CentralParams& params,
                                const CentralNodeOptions& options) {
  placement.check_against(system);
  asio::io_context io;
  boost::system::error_code ec;
  tcp::acceptor acceptor(io);
  const auto address = asio::ip::make_address(options.bind, ec);
  if (ec) throw ConfigError("bad bind address '" + options.bind + "'");
  const tcp::endpoint endpoint(address, options.port);
  acceptor.open(endpoint.protocol(), ec);
  if (!ec) acceptor.set_option(tcp::acceptor::reuse_address(true), ec);
  if (!ec) acceptor.bind(endpoint, ec);
  if (!ec) acceptor.listen(asio::socket_base::max_listen_connections, ec);
  if (ec) {
    throw NetworkError("cannot listen on " + options.bind + ":" + std::to_string(options.port) +
                       ": " + ec.message());
  }
  if (options.on_listening) options.on_listening(acceptor.local_endpoint().port());

  Shared sh;
  std::vector<std::thread> sessions;
  Aligner aligner(placement, options.align, monotonic_seconds());
  central::CentralRecorder recorder(system, placement, params);
  CentralNodeResult res;
  double last_event = monotonic_seconds();

  auto apply = [&](std::deque<Event> events) {
    for (auto& e : events) {
      last_event = e.at;
      std::visit(
          [&](auto& ev) {
            using T = std::decay_t<decltype(ev)>;
            if constexpr (std::is_same_v<T, FrameEvent>) {
              aligner.add_frame(ev.frame, e.at);
            } else if constexpr (std::is_same_v<T, ReportEvent>) {
              aligner.heard(ev.bus, e.at);
              res.reports.push_back(std::move(ev.report));
            } else if constexpr (std::is_same_v<T, StatusEvent>) {
              aligner.set_status(ev.bus, ev.status, e.at);
            } else {
              aligner.heard(ev.bus, e.at);
            }
          },
          e.what);
    }
  };

  while (true) {
    if (options.stop && options.stop->load()) break;
    if (wait_readable(acceptor.native_handle(), 10ms)) {
      tcp::socket socket(io);
      acceptor.accept(socket, ec);
      if (!ec) {
        socket.set_option(tcp::no_delay(true), ec);
        auto impl = std::make_unique<Connection::Impl>(nullptr, std::move(socket), options.wire);
        sessions.emplace_back(run_session, Connection(std::move(impl)), std::ref(sh),
                              std::cref(placement), std::cref(options));
      }
    }
    apply(sh.take());
    const double now = monotonic_seconds();
    for (const auto& s : aligner.drain(now)) recorder.push(s);
    if (aligner.all_finished()) break;
    if (sh.active.load() == 0 && now - last_event > options.idle_timeout_s) break;
  }

  sh.stopping = true;
  for (auto& t : sessions) t.join();
  apply(sh.take());
  for (const auto& s : aligner.drain(monotonic_seconds())) recorder.push(s);
  for (const auto& s : aligner.flush()) recorder.push(s);

  res.central = recorder.finish();
  res.sessions = aligner.sessions();
  for (auto& [bus, st] : res.sessions) {
    std::lock_guard lock(sh.mu);
    st.reports = sh.resume[bus].reports;
  }
  res.rejected_sessions = sh.rejected.load();
  res.log = central::fuse_reports(res.reports, res.central.clusters);
  return res;
}

}  // namespace gridwatch::transport
