// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "gridwatch/analytics/engine.hpp"
#include "gridwatch/central/central.hpp"
#include "gridwatch/model/system.hpp"
#include "gridwatch/transport/codec.hpp"

#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <vector>

namespace gridwatch::transport {

enum class Status { Never, Connected, Disconnected, Finished };

std::string_view to_string(Status s);

/// What the central side knows about one sensor.
struct SessionState {
  std::optional<SampleIndex> last_k;  ///< newest frame accepted
  std::int64_t gaps = 0;              ///< k values skipped in the frame stream
  std::int64_t duplicates = 0;        ///< frames at or before last_k
  std::int64_t late = 0;              ///< frames that arrived after their k was fused
  std::uint64_t reports = 0;          ///< reports accepted (next expected seq)
  Status status = Status::Never;
  double last_heard = 0.0;  ///< seconds, caller's clock

  /// Accounts for a frame at k. Returns false for a duplicate (k <= last_k).
  bool observe_frame(SampleIndex k);
};

struct AlignParams {
  /// Other sensors must be this many samples past a missing k before it is
  /// declared a gap.
  std::int64_t buffer = 24;
  /// ...and the missing sensor must have been silent this long (seconds).
  double straggler_s = 0.2;
};

/// Aligns per-sensor frame streams by k into FusedSamples.
///
/// A k is released once every sensor has either delivered it, moved past it,
/// finished, or is a straggler (silent for straggler_s while the others have
/// been `buffer` samples ahead for straggler_s). k values no sensor
/// delivered are never released, matching the in-process pipeline.
class Aligner {
 public:
  Aligner(model::Placement placement, AlignParams params, double now = 0.0);

  /// Returns false when the frame is a duplicate or arrives after its k was
  /// released; it is counted either way.
  bool add_frame(const analytics::PhasorFrame& frame, double now);
  void heard(BusId sensor, double now);
  void set_status(BusId sensor, Status status, double now);

  /// Samples ready at time `now`, in k order.
  std::vector<central::FusedSample> drain(double now);
  /// Releases everything still buffered, treating silent sensors as absent.
  std::vector<central::FusedSample> flush();

  const SessionState& session(BusId sensor) const;
  const std::map<BusId, SessionState>& sessions() const { return sessions_; }
  bool all_finished() const;

 private:
  std::vector<central::FusedSample> release(double now, bool force);
  std::size_t slot(BusId sensor) const;

  model::Placement placement_;
  AlignParams params_;
  std::map<BusId, SessionState> sessions_;
  std::vector<std::deque<analytics::PhasorFrame>> queues_;
  std::optional<SampleIndex> released_;  ///< highest k released so far
  std::optional<double> lagging_since_;  ///< when the others first got `buffer` ahead
};

/// Sensor-side send queue with report priority and a disk mirror.
///
/// Every message stays queued until acknowledged. `next()` hands out unsent
/// reports before any unsent frame. After a reconnect, `rewind` marks all
/// unacknowledged messages unsent again.
class Outbox {
 public:
  /// `spool` may be empty to keep the queue in memory only.
  explicit Outbox(std::filesystem::path spool = {});

  void push_report(Message m);
  void push_frame(Message m);

  /// Next message to send, or nullopt when everything queued was sent.
  std::optional<Message> next();
  /// Drops reports with seq < reports and frames with k <= last_k.
  void acknowledge(std::uint64_t reports, std::optional<SampleIndex> last_k);
  void rewind();

  std::size_t pending() const { return reports_.size() + frames_.size(); }
  bool all_sent() const;
  const std::filesystem::path& spool_path() const { return spool_; }

 private:
  void mirror(const Message& m);
  void compact();

  std::deque<Message> reports_;
  std::deque<Message> frames_;
  std::size_t sent_reports_ = 0;
  std::size_t sent_frames_ = 0;
  std::filesystem::path spool_;
  std::ofstream spool_out_;
};

/// Messages left in a spool file (for inspection and tests).
std::vector<Message> read_spool(const std::filesystem::path& path);

}  // namespace gridwatch::transport
