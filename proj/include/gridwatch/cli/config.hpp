// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "gridwatch/central/pipeline.hpp"
#include "gridwatch/transport/net.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace gridwatch::cli {

/// Every tunable of the pipeline. Defaults are the documented ones.
///
/// File format: INI sections with `key = value` lines, `#` or `;` comments.
///
///   [detector]  lambda_forget nu h warmup var_floor
///   [segment]   t1 t2
///   [local]     window_m freq_lambda
///   [voltage]   interruption sag swell table_max long_duration_s
///   [trend]     s_min rho window
///   [network]   host port wire align_buffer straggler_s idle_timeout_s
///               heartbeat_s reconnect_s give_up_s
///   [paths]     spool_dir
///
/// The central detector uses the same [detector] and [segment] values.
struct Config {
  central::PipelineConfig pipeline;
  std::string host = "127.0.0.1";
  std::uint16_t port = transport::kDefaultPort;
  transport::Wire wire = transport::Wire::Binary;
  transport::AlignParams align;
  double idle_timeout_s = 30.0;
  double heartbeat_s = 0.1;
  double reconnect_s = 0.05;
  double give_up_s = 30.0;
  std::filesystem::path spool_dir;

  /// Throws ConfigError for any value outside its valid range.
  void validate() const;
};

/// Reads a config file over the defaults. Throws ConfigError for unknown
/// sections or keys and for unparsable values.
Config load_config(const std::filesystem::path& path);

/// Applies "section.key=value" overrides in order.
void apply_overrides(Config& config, const std::vector<std::string>& overrides);

/// The effective configuration in file form.
std::string dump_config(const Config& config);

}  // namespace gridwatch::cli
