// SPDX-License-Identifier: Apache-2.0
#include "gridwatch/transport/session.hpp"

#include <algorithm>
#include <iterator>
#include <limits>

namespace gridwatch::transport {

std::string_view to_string(Status s) {
  switch (s) {
    case Status::Never: return "never";
    case Status::Connected: return "connected";
    case Status::Disconnected: return "disconnected";
    case Status::Finished: return "finished";
  }
  return "unknown";
}

bool SessionState::observe_frame(SampleIndex k) {
  if (last_k && k <= *last_k) {
    ++duplicates;
    return false;
  }
  if (last_k && k > *last_k + 1) gaps += k - *last_k - 1;
  last_k = k;
  return true;
}

Aligner::Aligner(model::Placement placement, AlignParams params, double now)
    : placement_(std::move(placement)), params_(params), queues_(placement_.size()) {
  for (BusId b : placement_.buses()) sessions_[b].last_heard = now;
}

std::size_t Aligner::slot(BusId sensor) const {
  const auto& b = placement_.buses();
  const auto it = std::lower_bound(b.begin(), b.end(), sensor);
  if (it == b.end() || *it != sensor) {
    throw ValidationError("sensor " + std::to_string(sensor) + " is not in the placement");
  }
  return static_cast<std::size_t>(std::distance(b.begin(), it));
}

const SessionState& Aligner::session(BusId sensor) const {
  slot(sensor);
  return sessions_.at(sensor);
}

bool Aligner::add_frame(const analytics::PhasorFrame& frame, double now) {
  const auto s = slot(frame.bus);
  auto& st = sessions_[frame.bus];
  st.last_heard = now;
  if (!st.observe_frame(frame.k)) return false;
  if (released_ && frame.k <= *released_) {
    ++st.late;
    return false;
  }
  queues_[s].push_back(frame);
  return true;
}

void Aligner::heard(BusId sensor, double now) { sessions_[placement_.buses()[slot(sensor)]].last_heard = now; }

void Aligner::set_status(BusId sensor, Status status, double now) {
  auto& st = sessions_[placement_.buses()[slot(sensor)]];
  st.status = status;
  st.last_heard = now;
}

bool Aligner::all_finished() const {
  return std::all_of(sessions_.begin(), sessions_.end(),
                     [](const auto& kv) { return kv.second.status == Status::Finished; });
}

std::vector<central::FusedSample> Aligner::drain(double now) { return release(now, false); }

std::vector<central::FusedSample> Aligner::flush() {
  return release(std::numeric_limits<double>::infinity(), true);
}

std::vector<central::FusedSample> Aligner::release(double now, bool force) {
  std::vector<central::FusedSample> out;
  const auto n = placement_.size();
  while (true) {
    // Candidate: the smallest buffered k.
    std::optional<SampleIndex> k;
    for (const auto& q : queues_) {
      if (!q.empty() && (!k || q.front().k < *k)) k = q.front().k;
    }
    if (!k) break;

    // Newest k any sensor has delivered, for the straggler rule.
    SampleIndex newest = *k;
    for (const auto& [bus, st] : sessions_) {
      if (st.last_k) newest = std::max(newest, *st.last_k);
    }

    bool ready = true;
    bool straggler = false;
    for (std::size_t s = 0; s < n && ready; ++s) {
      const auto& q = queues_[s];
      if (!q.empty()) continue;  // its front is at or beyond k
      const auto& st = sessions_.at(placement_.buses()[s]);
      if (st.last_k && *st.last_k >= *k) continue;  // moved past k already
      if (force || st.status == Status::Finished) continue;
      const bool behind = newest - *k >= params_.buffer;
      // The lag itself must also have lasted straggler_s, so a burst of
      // backlog from the first sensor back after an outage does not strand
      // the others.
      if (!behind) {
        lagging_since_.reset();
      } else if (!lagging_since_) {
        lagging_since_ = now;
      }
      const bool silent = now - st.last_heard > params_.straggler_s;
      ready = behind && silent && now - *lagging_since_ > params_.straggler_s;
      straggler = true;
    }
    if (!ready) break;
    if (!straggler) lagging_since_.reset();

    std::vector<const analytics::PhasorFrame*> frames(n, nullptr);
    for (std::size_t s = 0; s < n; ++s) {
      if (!queues_[s].empty() && queues_[s].front().k == *k) frames[s] = &queues_[s].front();
    }
    out.push_back(central::fuse_frames(placement_, *k, frames));
    for (std::size_t s = 0; s < n; ++s) {
      if (frames[s] != nullptr) queues_[s].pop_front();
    }
    released_ = *k;
  }
  return out;
}

Outbox::Outbox(std::filesystem::path spool) : spool_(std::move(spool)) {
  if (!spool_.empty()) {
    if (spool_.has_parent_path()) std::filesystem::create_directories(spool_.parent_path());
    spool_out_.open(spool_, std::ios::binary | std::ios::trunc);
    if (!spool_out_) throw DataError("cannot open spool file " + spool_.string());
  }
}

void Outbox::mirror(const Message& m) {
  if (!spool_out_.is_open()) return;
  const auto bytes = encode(m);
  spool_out_.write(reinterpret_cast<const char*>(bytes.data()),
                   static_cast<std::streamsize>(bytes.size()));
  spool_out_.flush();
}

void Outbox::compact() {
  if (!spool_out_.is_open()) return;
  spool_out_.close();
  spool_out_.open(spool_, std::ios::binary | std::ios::trunc);
  for (const auto& m : reports_) mirror(m);
  for (const auto& m : frames_) mirror(m);
}

void Outbox::push_report(Message m) {
  mirror(m);
  reports_.push_back(std::move(m));
}

void Outbox::push_frame(Message m) {
  mirror(m);
  frames_.push_back(std::move(m));
}

std::optional<Message> Outbox::next() {
  if (sent_reports_ < reports_.size()) return reports_[sent_reports_++];
  if (sent_frames_ < frames_.size()) return frames_[sent_frames_++];
  return std::nullopt;
}

bool Outbox::all_sent() const {
  return sent_reports_ == reports_.size() && sent_frames_ == frames_.size();
}

void Outbox::acknowledge(std::uint64_t reports, std::optional<SampleIndex> last_k) {
  std::size_t dropped = 0;
  while (!reports_.empty() && std::get<ReportBody>(reports_.front().body).seq < reports) {
    reports_.pop_front();
    sent_reports_ = sent_reports_ > 0 ? sent_reports_ - 1 : 0;
    ++dropped;
  }
  while (last_k && !frames_.empty() && frames_.front().k <= *last_k) {
    frames_.pop_front();
    sent_frames_ = sent_frames_ > 0 ? sent_frames_ - 1 : 0;
    ++dropped;
  }
  // Rewrite the mirror once it is mostly acknowledged history.
  if (dropped > 0 && (pending() == 0 || dropped >= 1024)) compact();
}

void Outbox::rewind() {
  sent_reports_ = 0;
  sent_frames_ = 0;
}

std::vector<Message> read_spool(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open spool file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<Message> out;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const std::span<const std::uint8_t> rest(bytes.data() + pos, bytes.size() - pos);
    const auto size = peek_message_size(rest);
    if (!size || *size > rest.size()) throw DecodeError(DecodeErrc::Truncated, "spool ends mid-message");
    out.push_back(decode(rest.first(*size)));
    pos += *size;
  }
  return out;
}

}  // namespace gridwatch::transport
