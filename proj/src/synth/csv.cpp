// SPDX-License-Identifier: Apache-2.0
#include "gridwatch/synth/csv.hpp"

#include "gridwatch/error.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

namespace gridwatch::synth {

namespace {

void put_double(std::string& row, double x) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", x);
  row.append(buf, static_cast<std::size_t>(n));
}

bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  std::string tmp(s);
  char* end = nullptr;
  out = std::strtod(tmp.c_str(), &end);
  return end == tmp.c_str() + tmp.size();
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = line.find(',', pos);
    out.push_back(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

}  // namespace

void write_stream_csv(std::ostream& out, const std::vector<analytics::PhasorFrame>& frames) {
  out << kStreamHeader << '\n';
  std::string row;
  for (const auto& f : frames) {
    for (const auto& [id, i] : f.i_lines) {
      row.clear();
      row += std::to_string(f.k);
      row += ',';
      row += analytics::iso_time(f.k);
      for (int p = 0; p < 3; ++p) {
        row += ',';
        put_double(row, f.v(p).real());
        row += ',';
        put_double(row, f.v(p).imag());
      }
      row += ',';
      row += id;
      for (int p = 0; p < 3; ++p) {
        row += ',';
        put_double(row, i(p).real());
        row += ',';
        put_double(row, i(p).imag());
      }
      row += '\n';
      out << row;
    }
  }
}

void write_stream_csv(const std::filesystem::path& path,
                      const std::vector<analytics::PhasorFrame>& frames) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  write_stream_csv(out, frames);
}

CsvReadResult read_stream_csv(std::istream& in, BusId bus) {
  CsvReadResult res;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (first) {
      first = false;
      if (line == kStreamHeader) continue;
    }
    if (line.empty()) continue;
    const auto cols = split(line);
    if (cols.size() != 15) {
      ++res.skipped_rows;
      continue;
    }
    SampleIndex k = 0;
    {
      auto [p, ec] = std::from_chars(cols[0].data(), cols[0].data() + cols[0].size(), k);
      if (ec != std::errc() || p != cols[0].data() + cols[0].size()) {
        ++res.skipped_rows;
        continue;
      }
    }
    double vals[12];
    bool ok = true;
    for (int c = 0; c < 6 && ok; ++c) ok = parse_double(cols[static_cast<std::size_t>(2 + c)], vals[c]);
    for (int c = 0; c < 6 && ok; ++c) ok = parse_double(cols[static_cast<std::size_t>(9 + c)], vals[6 + c]);
    if (!ok || cols[8].empty()) {
      ++res.skipped_rows;
      continue;
    }
    Vec3c v, i;
    for (int p = 0; p < 3; ++p) {
      v(p) = Complex(vals[2 * p], vals[2 * p + 1]);
      i(p) = Complex(vals[6 + 2 * p], vals[6 + 2 * p + 1]);
    }
    if (!v.allFinite() || !i.allFinite()) {
      ++res.skipped_rows;
      continue;
    }
    if (res.frames.empty() || res.frames.back().k != k) {
      if (!res.frames.empty() && k < res.frames.back().k) {
        ++res.skipped_rows;  // out of order
        continue;
      }
      analytics::PhasorFrame f;
      f.k = k;
      f.bus = bus;
      f.v = v;
      res.frames.push_back(std::move(f));
    }
    res.frames.back().i_lines[std::string(cols[8])] = i;
  }
  return res;
}

CsvReadResult read_stream_csv(const std::filesystem::path& path, BusId bus) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open stream file " + path.string());
  return read_stream_csv(in, bus);
}

}  // namespace gridwatch::synth
