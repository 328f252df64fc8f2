// SPDX-License-Identifier: Apache-2.0
#include "gridwatch/cli/config.hpp"

#include "gridwatch/error.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <array>
#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

namespace gridwatch::cli {

namespace {

namespace pt = boost::property_tree;

double parse_real(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) throw ConfigError(key + ": not a number: '" + text + "'");
  return v;
}

std::int64_t parse_int(const std::string& key, const std::string& text) {
  std::int64_t v = 0;
  const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || p != text.data() + text.size()) {
    throw ConfigError(key + ": not an integer: '" + text + "'");
  }
  return v;
}

struct Field {
  std::function<void(Config&, const std::string&)> set;
  std::function<std::string(const Config&)> get;
};

// Shortest text that reads back to the same double.
std::string fmt(double v) {
  std::array<char, 32> buf{};
  const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), r.ptr);
}

// Builds the table of known keys.
const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> t;
    auto real = [&t](const std::string& key, auto ref) {
      t[key] = {[key, ref](Config& c, const std::string& v) { ref(c) = parse_real(key, v); },
                [ref](const Config& c) {
                  Config copy = c;
                  return fmt(ref(copy));
                }};
    };
    auto integer = [&t](const std::string& key, auto ref) {
      t[key] = {[key, ref](Config& c, const std::string& v) {
                  ref(c) = static_cast<std::remove_reference_t<decltype(ref(c))>>(parse_int(key, v));
                },
                [ref](const Config& c) {
                  Config copy = c;
                  return std::to_string(ref(copy));
                }};
    };
    real("detector.lambda_forget", [](Config& c) -> double& { return c.pipeline.local.detector.lambda_forget; });
    real("detector.nu", [](Config& c) -> double& { return c.pipeline.local.detector.nu; });
    real("detector.h", [](Config& c) -> double& { return c.pipeline.local.detector.h; });
    integer("detector.warmup", [](Config& c) -> std::int64_t& { return c.pipeline.local.detector.warmup; });
    real("detector.var_floor", [](Config& c) -> double& { return c.pipeline.local.detector.var_floor; });
    integer("segment.t1", [](Config& c) -> std::int64_t& { return c.pipeline.local.segment.quiet_close; });
    integer("segment.t2", [](Config& c) -> std::int64_t& { return c.pipeline.local.segment.persistent_after; });
    integer("local.window_m", [](Config& c) -> int& { return c.pipeline.local.window_m; });
    real("local.freq_lambda", [](Config& c) -> double& { return c.pipeline.local.freq_lambda; });
    real("voltage.interruption", [](Config& c) -> double& { return c.pipeline.local.voltage.interruption; });
    real("voltage.sag", [](Config& c) -> double& { return c.pipeline.local.voltage.sag; });
    real("voltage.swell", [](Config& c) -> double& { return c.pipeline.local.voltage.swell; });
    real("voltage.table_max", [](Config& c) -> double& { return c.pipeline.local.voltage.table_max; });
    real("voltage.long_duration_s", [](Config& c) -> double& { return c.pipeline.local.voltage.long_duration_s; });
    real("trend.s_min", [](Config& c) -> double& { return c.pipeline.local.trend.s_min; });
    real("trend.rho", [](Config& c) -> double& { return c.pipeline.local.trend.rho; });
    integer("trend.window", [](Config& c) -> int& { return c.pipeline.local.trend.window; });
    t["network.host"] = {[](Config& c, const std::string& v) { c.host = v; },
                         [](const Config& c) { return c.host; }};
    t["network.port"] = {[](Config& c, const std::string& v) {
                           const auto p = parse_int("network.port", v);
                           if (p < 0 || p > 65535) throw ConfigError("network.port out of range");
                           c.port = static_cast<std::uint16_t>(p);
                         },
                         [](const Config& c) { return std::to_string(c.port); }};
    t["network.wire"] = {[](Config& c, const std::string& v) { c.wire = transport::wire_from_string(v); },
                         [](const Config& c) {
                           return std::string(c.wire == transport::Wire::Json ? "json" : "binary");
                         }};
    integer("network.align_buffer", [](Config& c) -> std::int64_t& { return c.align.buffer; });
    real("network.straggler_s", [](Config& c) -> double& { return c.align.straggler_s; });
    real("network.idle_timeout_s", [](Config& c) -> double& { return c.idle_timeout_s; });
    real("network.heartbeat_s", [](Config& c) -> double& { return c.heartbeat_s; });
    real("network.reconnect_s", [](Config& c) -> double& { return c.reconnect_s; });
    real("network.give_up_s", [](Config& c) -> double& { return c.give_up_s; });
    t["paths.spool_dir"] = {[](Config& c, const std::string& v) { c.spool_dir = v; },
                            [](const Config& c) { return c.spool_dir.string(); }};
    return t;
  }();
  return table;
}

void set(Config& c, const std::string& key, const std::string& value) {
  const auto it = fields().find(key);
  if (it == fields().end()) throw ConfigError("unknown config key '" + key + "'");
  it->second.set(c, value);
}

void sync_central(Config& c) {
  c.pipeline.central.detector = c.pipeline.local.detector;
  c.pipeline.central.segment = c.pipeline.local.segment;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace

void Config::validate() const {
  const auto& l = pipeline.local;
  const auto& d = l.detector;
  require(d.lambda_forget > 0 && d.lambda_forget < 1, "detector.lambda_forget must be in (0, 1)");
  require(d.nu > 0 && std::isfinite(d.nu), "detector.nu must be > 0");
  require(d.h > 0 && std::isfinite(d.h), "detector.h must be > 0");
  require(d.warmup >= 2, "detector.warmup must be >= 2");
  require(d.var_floor > 0 && std::isfinite(d.var_floor), "detector.var_floor must be > 0");
  require(l.segment.quiet_close >= 1, "segment.t1 must be >= 1");
  require(l.segment.persistent_after >= 1, "segment.t2 must be >= 1");
  require(l.window_m >= 2, "local.window_m must be >= 2");
  require(l.freq_lambda >= 0 && l.freq_lambda < 1, "local.freq_lambda must be in [0, 1)");
  const auto& v = l.voltage;
  require(0 < v.interruption && v.interruption < v.sag && v.sag < 1 && 1 < v.swell &&
              v.swell < v.table_max,
          "voltage thresholds must satisfy 0 < interruption < sag < 1 < swell < table_max");
  require(v.long_duration_s > 0, "voltage.long_duration_s must be > 0");
  require(l.trend.s_min > 0 && l.trend.s_min < 1, "trend.s_min must be in (0, 1)");
  require(l.trend.rho > 1, "trend.rho must be > 1");
  require(l.trend.window >= 3, "trend.window must be >= 3");
  require(align.buffer >= 0, "network.align_buffer must be >= 0");
  require(align.straggler_s >= 0, "network.straggler_s must be >= 0");
  require(idle_timeout_s > 0, "network.idle_timeout_s must be > 0");
  require(heartbeat_s > 0, "network.heartbeat_s must be > 0");
  require(reconnect_s > 0, "network.reconnect_s must be > 0");
  require(give_up_s > 0, "network.give_up_s must be > 0");
}

Config load_config(const std::filesystem::path& path) {
  pt::ptree tree;
  try {
    pt::read_ini(path.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  Config c;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("config key '" + section + "' outside a section");
    for (const auto& [key, value] : body) set(c, section + "." + key, value.data());
  }
  sync_central(c);
  c.validate();
  return c;
}

void apply_overrides(Config& config, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + o + "' is not section.key=value");
    set(config, o.substr(0, eq), o.substr(eq + 1));
  }
  sync_central(config);
  config.validate();
}

std::string dump_config(const Config& config) {
  std::ostringstream out;
  std::string section;
  for (const auto& [key, field] : fields()) {
    const auto dot = key.find('.');
    if (key.substr(0, dot) != section) {
      section = key.substr(0, dot);
      out << (out.tellp() > 0 ? "\n" : "") << '[' << section << "]\n";
    }
    out << key.substr(dot + 1) << " = " << field.get(config) << '\n';
  }
  return out.str();
}

}  // namespace gridwatch::cli
