// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "gridwatch/analytics/engine.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string_view>
#include <vector>

namespace gridwatch::synth {

/// Stream file header. One row per (k, line); the voltage columns repeat on
/// every row of the same k. Doubles are written with 17 significant digits
/// so a round trip is exact.
inline constexpr std::string_view kStreamHeader =
    "k,iso_time,v_a_re,v_a_im,v_b_re,v_b_im,v_c_re,v_c_im,line_id,"
    "i_a_re,i_a_im,i_b_re,i_b_im,i_c_re,i_c_im";

void write_stream_csv(std::ostream& out, const std::vector<analytics::PhasorFrame>& frames);
void write_stream_csv(const std::filesystem::path& path,
                      const std::vector<analytics::PhasorFrame>& frames);

struct CsvReadResult {
  std::vector<analytics::PhasorFrame> frames;
  std::int64_t skipped_rows = 0;
};

/// Rows that fail to parse are skipped and counted. Consecutive rows with the
/// same k form one frame.
CsvReadResult read_stream_csv(std::istream& in, BusId bus);
CsvReadResult read_stream_csv(const std::filesystem::path& path, BusId bus);

}  // namespace gridwatch::synth
