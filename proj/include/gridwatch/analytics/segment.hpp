// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "gridwatch/types.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace gridwatch::analytics {

struct SegmentParams {
  /// Quiet samples after the last violation that close an event (T1).
  std::int64_t quiet_close = 120;
  /// Violations inside one open event that trigger the Persistent report (T2).
  std::int64_t persistent_after = 240;
};

struct Segment {
  SampleIndex start_k = 0;
  SampleIndex last_k = 0;
  std::int64_t violations = 0;
};

enum class SegmentEventKind { Persistent, Closed };

struct SegmentEvent {
  SegmentEventKind kind = SegmentEventKind::Closed;
  Segment segment;
};

/// Event segmentation state machine for one flag stream.
///
/// A violation opens an event (or extends the open one). The event closes
/// once `quiet_close` samples pass with no violation; the closing segment ends
/// at the last violation. When the violation count of an open event first
/// exceeds `persistent_after`, a Persistent event is emitted and the event
/// stays open.
class Segmenter {
 public:
  explicit Segmenter(SegmentParams params = {}) : params_(params) {}

  /// Feed sample k. Samples must arrive with increasing k; skipped k values
  /// count as quiet.
  std::optional<SegmentEvent> step(SampleIndex k, bool violated);
  /// Close any open event at end of stream.
  std::optional<SegmentEvent> flush();

  bool open() const { return open_.has_value(); }
  const std::optional<Segment>& current() const { return open_; }

 private:
  SegmentParams params_;
  std::optional<Segment> open_;
  bool persistent_sent_ = false;
};

/// Run a Segmenter over a dense flag stream starting at k = 0.
std::vector<SegmentEvent> segment_events(std::span<const bool> flags, SegmentParams params = {});

}  // namespace gridwatch::analytics
