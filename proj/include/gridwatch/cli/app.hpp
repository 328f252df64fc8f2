// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "gridwatch/central/eventlog.hpp"
#include "gridwatch/central/pipeline.hpp"
#include "gridwatch/cli/config.hpp"
#include "gridwatch/synth/generate.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace gridwatch::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kConfig = 2, kData = 3, kNetwork = 4 };

/// Runs the `gridwatch` command line. args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// A feeder file path, or a bundled feeder name such as "ieee34".
std::filesystem::path resolve_feeder(const std::string& name_or_path);

/// What `simulate` writes next to the streams.
struct Manifest {
  std::string scenario;
  std::filesystem::path feeder;
  std::vector<BusId> sensors;
  std::uint64_t seed = 0;
  /// File names relative to the manifest's directory.
  std::map<BusId, std::string> streams;
  std::map<BusId, std::string> uplink;
  std::string groundtruth = "groundtruth.json";
};

Manifest read_manifest(const std::filesystem::path& dir);

/// simulate: streams, tampered uplinks, groundtruth.json and manifest.json.
Manifest write_simulation(const synth::Scenario& scenario, const synth::SimulationResult& sim,
                          const std::filesystem::path& dir);

struct LoadedStreams {
  central::Streams measured;
  central::Streams uplink;
  std::int64_t skipped_rows = 0;
};

LoadedStreams load_streams(const std::filesystem::path& dir, const Manifest& manifest);

/// analyze: runs the in-process pipeline over a simulate directory and writes
/// eventlog.jsonl, central_metric.csv and derived_<bus>.csv into `out`.
central::PipelineResult analyze_dir(const std::filesystem::path& in, const std::filesystem::path& out,
                                    const Config& config);

void write_central_metric(const std::filesystem::path& path, const central::CentralRun& run);
void write_eventlog(const std::filesystem::path& path, const central::EventLog& log);

/// Outcome of comparing an EventLog with ground truth.
struct Score {
  struct EventMatch {
    std::string kind;
    SampleIndex start_k = 0;
    SampleIndex end_k = 0;
    bool detectable = true;  ///< false for uplink tampering, which no rule targets
    std::vector<int> incidents;
  };
  std::vector<EventMatch> events;
  int hits = 0;
  int misses = 0;
  int false_alarms = 0;  ///< incidents matching no event window
  int incidents = 0;
};

/// An incident matches an event when their intervals, the event's widened by
/// `tolerance` samples on both sides, intersect.
Score score(const central::EventLog& log, const synth::GroundTruth& truth, SampleIndex tolerance);

nlohmann::json to_json(const Score& s);
std::string score_table(const Score& s);

}  // namespace gridwatch::cli
