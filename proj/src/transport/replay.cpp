// SPDX-License-Identifier: Apache-2.0
#include "gridwatch/transport/replay.hpp"

#include "gridwatch/error.hpp"
#include "gridwatch/synth/csv.hpp"
#include "gridwatch/transport/net.hpp"

#include <thread>

namespace gridwatch::transport {

Pacer::Pacer(double rate) : rate_(rate), t0_(monotonic_seconds()) {
  if (!(rate >= 0.0)) throw ConfigError("replay rate must be >= 0");
}

void Pacer::wait_for(std::size_t i) const {
  if (rate_ == 0.0) return;
  const double due = t0_ + static_cast<double>(i) / (kSampleRateHz * rate_);
  const double left = due - monotonic_seconds();
  if (left > 0) std::this_thread::sleep_for(std::chrono::duration<double>(left));
}

ReplayStats replay_csv(const std::filesystem::path& path, BusId bus, double rate,
                       const std::function<bool(const analytics::PhasorFrame&)>& sink) {
  const auto read = synth::read_stream_csv(path, bus);
  ReplayStats stats;
  stats.skipped_rows = read.skipped_rows;
  const Pacer pacer(rate);
  for (const auto& f : read.frames) {
    pacer.wait_for(stats.frames);
    ++stats.frames;
    if (!sink(f)) break;
  }
  return stats;
}

}  // namespace gridwatch::transport
