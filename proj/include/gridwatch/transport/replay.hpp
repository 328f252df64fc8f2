// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "gridwatch/analytics/engine.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>

namespace gridwatch::transport {

/// Release times for a stream played at 120 * rate frames per second.
/// Rate 0 releases everything immediately.
class Pacer {
 public:
  explicit Pacer(double rate);
  /// Blocks until frame `i` is due.
  void wait_for(std::size_t i) const;
  double rate() const { return rate_; }

 private:
  double rate_;
  double t0_;
};

struct ReplayStats {
  std::size_t frames = 0;
  std::int64_t skipped_rows = 0;
};

/// Plays a sensor CSV file in file order. `sink` returning false stops the
/// replay early. Malformed rows are skipped and counted.
ReplayStats replay_csv(const std::filesystem::path& path, BusId bus, double rate,
                       const std::function<bool(const analytics::PhasorFrame&)>& sink);

}  // namespace gridwatch::transport
