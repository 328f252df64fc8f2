// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "gridwatch/analytics/engine.hpp"
#include "gridwatch/central/pipeline.hpp"
#include "gridwatch/model/system.hpp"
#include "gridwatch/transport/codec.hpp"
#include "gridwatch/transport/session.hpp"

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace gridwatch::transport {

/// Binary frames, or one JSON object per line for debugging with netcat.
enum class Wire { Binary, Json };

Wire wire_from_string(std::string_view text);

/// Blocking TCP connection that exchanges whole messages.
class Connection {
 public:
  /// Throws NetworkError when the peer cannot be reached.
  static Connection connect(const std::string& host, std::uint16_t port, Wire wire);

  Connection(Connection&&) noexcept;
  Connection& operator=(Connection&&) noexcept;
  ~Connection();

  /// Throws NetworkError on a broken connection.
  void send(const Message& m);
  /// Waits up to `timeout` for one message. Returns nullopt on timeout.
  /// Throws NetworkError when the peer closed or the stream is corrupt.
  std::optional<Message> receive(std::chrono::milliseconds timeout);
  void close();
  bool is_open() const;

  struct Impl;
  explicit Connection(std::unique_ptr<Impl> impl);

 private:
  std::unique_ptr<Impl> impl_;
};

/// Seconds on a monotonic clock.
double monotonic_seconds();

struct LocalNodeOptions {
  std::string host = "127.0.0.1";
  std::uint16_t port = kDefaultPort;
  Wire wire = Wire::Binary;
  /// Unacknowledged messages are mirrored here; empty keeps them in memory.
  std::filesystem::path spool;
  /// Frames per second = 120 * rate; 0 sends as fast as possible.
  double rate = 0.0;
  double heartbeat_s = 0.1;
  double reconnect_s = 0.05;
  /// Give up when the central side stays unreachable this long.
  double give_up_s = 30.0;
  const std::atomic<bool>* stop = nullptr;
};

struct LocalNodeResult {
  std::vector<analytics::AnomalyReport> reports;
  std::uint64_t frames_sent = 0;   ///< including resends
  std::uint64_t reports_sent = 0;  ///< including resends
  int connections = 0;
};

/// One sensor: runs the local engine on `measured`, forwards the frames of
/// `uplink` (or `measured` when null) and every report to the central side,
/// and ends the session once everything is acknowledged. Throws NetworkError
/// when the central side stays unreachable or rejects the sensor.
LocalNodeResult serve_local(BusId sensor, const analytics::LocalConfig& config,
                            const std::vector<analytics::PhasorFrame>& measured,
                            const std::vector<analytics::PhasorFrame>* uplink,
                            const LocalNodeOptions& options);

struct CentralNodeOptions {
  std::string bind = "127.0.0.1";
  std::uint16_t port = kDefaultPort;  ///< 0 picks a free port
  Wire wire = Wire::Binary;
  AlignParams align;
  double ack_interval_s = 0.05;
  /// Stop when no sensor is connected and nothing arrived for this long.
  double idle_timeout_s = 30.0;
  /// Called with the bound port once the server accepts connections.
  std::function<void(std::uint16_t)> on_listening;
  const std::atomic<bool>* stop = nullptr;
};

struct CentralNodeResult {
  central::EventLog log;
  central::CentralRun central;
  std::vector<analytics::AnomalyReport> reports;
  std::map<BusId, SessionState> sessions;
  int rejected_sessions = 0;
};

/// Accepts one session per placement sensor, aligns their frames by k, runs
/// the central engine and fuses its clusters with the received reports.
/// Returns when every sensor has finished, on idle timeout, or on stop.
CentralNodeResult serve_central(const model::SystemMatrix& system, const model::Placement& placement,
                                const central::CentralParams& params,
                                const CentralNodeOptions& options);

}  // namespace gridwatch::transport
