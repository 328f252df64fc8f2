// SPDX-License-Identifier: Apache-2.0
#include "gridwatch/analytics/segment.hpp"

namespace gridwatch::analytics {

std::optional<SegmentEvent> Segmenter::step(SampleIndex k, bool violated) {
  if (open_ && k - open_->last_k >= params_.quiet_close) {
    // Closing takes priority: a violation at exactly T1 quiet samples starts
    // the next event, which the caller sees on its next step.
    SegmentEvent ev{SegmentEventKind::Closed, *open_};
    open_.reset();
    persistent_sent_ = false;
    if (violated) {
      open_ = Segment{k, k, 1};
    }
    return ev;
  }
  if (!violated) return std::nullopt;
  if (!open_) {
    open_ = Segment{k, k, 1};
  } else {
    open_->last_k = k;
    ++open_->violations;
  }
  if (!persistent_sent_ && open_->violations > params_.persistent_after) {
    persistent_sent_ = true;
    return SegmentEvent{SegmentEventKind::Persistent, *open_};
  }
  return std::nullopt;
}

std::optional<SegmentEvent> Segmenter::flush() {
  if (!open_) return std::nullopt;
  SegmentEvent ev{SegmentEventKind::Closed, *open_};
  open_.reset();
  persistent_sent_ = false;
  return ev;
}

std::vector<SegmentEvent> segment_events(std::span<const bool> flags, SegmentParams params) {
  Segmenter seg(params);
  std::vector<SegmentEvent> out;
  for (std::size_t k = 0; k < flags.size(); ++k) {
    if (auto ev = seg.step(static_cast<SampleIndex>(k), flags[k])) out.push_back(*ev);
  }
  if (auto ev = seg.flush()) out.push_back(*ev);
  return out;
}

}  // namespace gridwatch::analytics
