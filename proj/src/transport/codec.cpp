// SPDX-License-Identifier: Apache-2.0
#include "gridwatch/transport/codec.hpp"

#include <nlohmann/json.hpp>
#include <zlib.h>

#include <bit>
#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace gridwatch::transport {

namespace {

constexpr std::size_t kPrefixBytes = 4;
constexpr std::size_t kHeaderBytes = kPrefixBytes + 1 + 1 + 2 + 4 + 8;
constexpr int kRuleCount = 7;
constexpr int kLabelCount = 11;

static_assert(std::endian::native == std::endian::little,
              "the codec writes host-order integers and assumes a little-endian host");

class Writer {
 public:
  explicit Writer(std::vector<std::uint8_t>& out) : out_(out) {}

  template <class T>
  void put(T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto at = out_.size();
    out_.resize(at + sizeof(T));
    std::memcpy(out_.data() + at, &value, sizeof(T));
  }
  void put_complex(Complex c) {
    put(c.real());
    put(c.imag());
  }
  void put_string(const std::string& s) {
    if (s.size() > 0xFFFF) throw DataError("string too long for the wire: " + std::to_string(s.size()));
    put(static_cast<std::uint16_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }

 private:
  std::vector<std::uint8_t>& out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  template <class T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  Complex get_complex() {
    const double re = get<double>();
    const double im = get<double>();
    return {re, im};
  }
  std::string get_string() {
    const auto n = get<std::uint16_t>();
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw DecodeError(DecodeErrc::BadPayload, "payload ends early");
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

std::uint32_t checksum(std::span<const std::uint8_t> bytes) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, bytes.data(), static_cast<uInt>(bytes.size())));
}

void put_vec3c(Writer& w, const Vec3c& v) {
  for (int p = 0; p < 3; ++p) w.put_complex(v(p));
}

Vec3c get_vec3c(Reader& r) {
  Vec3c v;
  for (int p = 0; p < 3; ++p) v(p) = r.get_complex();
  return v;
}

struct PayloadWriter {
  Writer& w;
  void operator()(const FrameBody& b) const {
    put_vec3c(w, b.v);
    if (b.i_lines.size() > 0xFFFF) throw DataError("too many lines in one frame");
    w.put(static_cast<std::uint16_t>(b.i_lines.size()));
    for (const auto& [id, i] : b.i_lines) {
      w.put_string(id);
      put_vec3c(w, i);
    }
  }
  void operator()(const ReportBody& b) const {
    const auto& r = b.report;
    w.put(b.seq);
    w.put(static_cast<std::uint8_t>(r.rule));
    w.put(static_cast<std::uint8_t>(r.label));
    w.put(static_cast<std::int32_t>(r.bus));
    w.put(static_cast<std::uint8_t>(r.line.has_value()));
    w.put_string(r.line.value_or(""));
    w.put_string(r.phases);
    w.put(r.start_k);
    w.put(static_cast<std::uint8_t>(r.end_k.has_value()));
    w.put(r.end_k.value_or(0));
    w.put(r.severity);
    w.put(static_cast<std::uint8_t>(r.out_of_table));
  }
  void operator()(const HeartbeatBody& b) const { w.put(b.reports); }
  void operator()(const HelloBody& b) const {
    w.put(static_cast<std::uint8_t>(b.role));
    w.put(b.reports);
  }
  void operator()(const ByeBody& b) const {
    w.put(static_cast<std::uint8_t>(b.reason));
    w.put(b.reports);
  }
};

bool get_flag(Reader& r) {
  const auto f = r.get<std::uint8_t>();
  if (f > 1) throw DecodeError(DecodeErrc::BadPayload, "flag byte is not 0 or 1");
  return f == 1;
}

Body read_payload(Kind kind, Reader& r) {
  switch (kind) {
    case Kind::Frame: {
      FrameBody b;
      b.v = get_vec3c(r);
      const auto n = r.get<std::uint16_t>();
      for (std::uint16_t j = 0; j < n; ++j) {
        auto id = r.get_string();
        auto i = get_vec3c(r);
        if (!b.i_lines.emplace(std::move(id), i).second) {
          throw DecodeError(DecodeErrc::BadPayload, "duplicate line id in frame");
        }
      }
      return b;
    }
    case Kind::Report: {
      ReportBody b;
      b.seq = r.get<std::uint64_t>();
      const auto rule = r.get<std::uint8_t>();
      const auto label = r.get<std::uint8_t>();
      if (rule >= kRuleCount || label >= kLabelCount) {
        throw DecodeError(DecodeErrc::BadPayload, "rule or label out of range");
      }
      auto& rep = b.report;
      rep.rule = static_cast<analytics::Rule>(rule);
      rep.label = static_cast<analytics::Label>(label);
      rep.bus = r.get<std::int32_t>();
      const bool has_line = get_flag(r);
      auto line = r.get_string();
      if (has_line) {
        rep.line = std::move(line);
      } else if (!line.empty()) {
        throw DecodeError(DecodeErrc::BadPayload, "line text without line flag");
      }
      rep.phases = r.get_string();
      rep.start_k = r.get<std::int64_t>();
      const bool has_end = get_flag(r);
      const auto end = r.get<std::int64_t>();
      if (has_end) {
        rep.end_k = end;
      } else if (end != 0) {
        throw DecodeError(DecodeErrc::BadPayload, "end index without end flag");
      }
      rep.severity = r.get<double>();
      rep.out_of_table = get_flag(r);
      return b;
    }
    case Kind::Heartbeat:
      return HeartbeatBody{r.get<std::uint64_t>()};
    case Kind::Hello: {
      const auto role = r.get<std::uint8_t>();
      if (role > 1) throw DecodeError(DecodeErrc::BadPayload, "unknown role");
      return HelloBody{static_cast<Role>(role), r.get<std::uint64_t>()};
    }
    case Kind::Bye: {
      const auto reason = r.get<std::uint8_t>();
      if (reason > 2) throw DecodeError(DecodeErrc::BadPayload, "unknown bye reason");
      return ByeBody{static_cast<ByeReason>(reason), r.get<std::uint64_t>()};
    }
  }
  throw DecodeError(DecodeErrc::UnknownKind, "unknown message kind");
}

bool valid_kind(std::uint8_t k) { return k >= 1 && k <= 5; }

// JSON helpers: doubles go through %.17g text so the debug form is lossless.
std::string exact(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double parse_exact(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  const auto s = j.get<std::string>();
  char* end = nullptr;
  const double x = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw DecodeError(DecodeErrc::BadPayload, "bad number '" + s + "'");
  }
  return x;
}

nlohmann::json vec_json(const Vec3c& v) {
  auto a = nlohmann::json::array();
  for (int p = 0; p < 3; ++p) a.push_back({exact(v(p).real()), exact(v(p).imag())});
  return a;
}

Vec3c vec_from_json(const nlohmann::json& a) {
  if (!a.is_array() || a.size() != 3) throw DecodeError(DecodeErrc::BadPayload, "expected 3 phasors");
  Vec3c v;
  for (int p = 0; p < 3; ++p) {
    const auto& c = a[static_cast<std::size_t>(p)];
    if (!c.is_array() || c.size() != 2) throw DecodeError(DecodeErrc::BadPayload, "expected [re, im]");
    v(p) = Complex(parse_exact(c[0]), parse_exact(c[1]));
  }
  return v;
}

}  // namespace

std::string_view to_string(Kind kind) {
  switch (kind) {
    case Kind::Frame: return "frame";
    case Kind::Report: return "report";
    case Kind::Heartbeat: return "heartbeat";
    case Kind::Hello: return "hello";
    case Kind::Bye: return "bye";
  }
  return "unknown";
}

std::string_view to_string(DecodeErrc code) {
  switch (code) {
    case DecodeErrc::Truncated: return "truncated";
    case DecodeErrc::TooLarge: return "too_large";
    case DecodeErrc::BadLength: return "bad_length";
    case DecodeErrc::VersionMismatch: return "version_mismatch";
    case DecodeErrc::UnknownKind: return "unknown_kind";
    case DecodeErrc::Checksum: return "checksum";
    case DecodeErrc::BadPayload: return "bad_payload";
  }
  return "unknown";
}

DecodeError::DecodeError(DecodeErrc code, const std::string& what)
    : DataError(std::string(to_string(code)) + ": " + what), code_(code) {}

Kind Message::kind() const {
  return static_cast<Kind>(body.index() + 1);
}

Message make_frame(const analytics::PhasorFrame& frame) {
  Message m;
  m.sensor_id = static_cast<std::uint32_t>(frame.bus);
  m.k = frame.k;
  m.body = FrameBody{frame.v, frame.i_lines};
  return m;
}

analytics::PhasorFrame to_phasor_frame(const Message& m) {
  const auto& b = std::get<FrameBody>(m.body);
  analytics::PhasorFrame f;
  f.k = m.k;
  f.bus = static_cast<BusId>(m.sensor_id);
  f.v = b.v;
  f.i_lines = b.i_lines;
  return f;
}

std::vector<std::uint8_t> encode(const Message& m) {
  std::vector<std::uint8_t> out;
  out.reserve(64);
  Writer w(out);
  w.put(std::uint32_t{0});  // length, patched below
  w.put(m.version);
  w.put(static_cast<std::uint8_t>(m.kind()));
  w.put(std::uint16_t{0});
  w.put(m.sensor_id);
  w.put(m.k);
  std::visit(PayloadWriter{w}, m.body);
  const auto crc = checksum(std::span(out).subspan(kPrefixBytes));
  w.put(crc);
  const auto length = static_cast<std::uint32_t>(out.size() - kPrefixBytes);
  if (length > kMaxMessageBytes) throw DataError("message exceeds the 1 MiB limit");
  std::memcpy(out.data(), &length, sizeof length);
  return out;
}

std::optional<std::size_t> peek_message_size(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kPrefixBytes) return std::nullopt;
  std::uint32_t length = 0;
  std::memcpy(&length, bytes.data(), sizeof length);
  if (length > kMaxMessageBytes) {
    throw DecodeError(DecodeErrc::TooLarge, "length prefix " + std::to_string(length));
  }
  if (length < kEnvelopeBytes) {
    throw DecodeError(DecodeErrc::BadLength, "length prefix " + std::to_string(length));
  }
  return kPrefixBytes + length;
}

Message decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kPrefixBytes) throw DecodeError(DecodeErrc::Truncated, "no length prefix");
  const auto total = *peek_message_size(bytes);
  if (bytes.size() < total) throw DecodeError(DecodeErrc::Truncated, "message ends early");
  if (bytes.size() > total) throw DecodeError(DecodeErrc::BadLength, "bytes after the message");

  Reader head(bytes.subspan(kPrefixBytes, kHeaderBytes - kPrefixBytes));
  Message m;
  m.version = head.get<std::uint8_t>();
  if (m.version != kProtocolVersion) {
    throw DecodeError(DecodeErrc::VersionMismatch, "version " + std::to_string(m.version));
  }
  const auto kind = head.get<std::uint8_t>();
  if (!valid_kind(kind)) throw DecodeError(DecodeErrc::UnknownKind, "kind " + std::to_string(kind));
  if (head.get<std::uint16_t>() != 0) throw DecodeError(DecodeErrc::BadPayload, "reserved bits set");
  m.sensor_id = head.get<std::uint32_t>();
  m.k = head.get<std::int64_t>();

  const auto covered = bytes.subspan(kPrefixBytes, total - kPrefixBytes - 4);
  std::uint32_t crc = 0;
  std::memcpy(&crc, bytes.data() + total - 4, sizeof crc);
  if (crc != checksum(covered)) throw DecodeError(DecodeErrc::Checksum, "crc mismatch");

  Reader body(bytes.subspan(kHeaderBytes, total - kHeaderBytes - 4));
  m.body = read_payload(static_cast<Kind>(kind), body);
  if (!body.done()) throw DecodeError(DecodeErrc::BadPayload, "trailing payload bytes");
  return m;
}

std::string encode_json(const Message& m) {
  nlohmann::json j;
  j["version"] = m.version;
  j["kind"] = to_string(m.kind());
  j["sensor"] = m.sensor_id;
  j["k"] = m.k;
  std::visit(
      [&](const auto& b) {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, FrameBody>) {
          j["v"] = vec_json(b.v);
          auto lines = nlohmann::json::object();
          for (const auto& [id, i] : b.i_lines) lines[id] = vec_json(i);
          j["i"] = lines;
        } else if constexpr (std::is_same_v<T, ReportBody>) {
          j["seq"] = b.seq;
          auto r = analytics::to_json(b.report);
          r["severity"] = exact(b.report.severity);
          j["report"] = r;
        } else if constexpr (std::is_same_v<T, HeartbeatBody>) {
          j["reports"] = b.reports;
        } else if constexpr (std::is_same_v<T, HelloBody>) {
          j["role"] = b.role == Role::Sensor ? "sensor" : "central";
          j["reports"] = b.reports;
        } else {
          j["reason"] = static_cast<int>(b.reason);
          j["reports"] = b.reports;
        }
      },
      m.body);
  return j.dump();
}

Message decode_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DecodeError(DecodeErrc::BadPayload, std::string("json: ") + e.what());
  }
  try {
    Message m;
    m.version = j.at("version").get<std::uint8_t>();
    if (m.version != kProtocolVersion) {
      throw DecodeError(DecodeErrc::VersionMismatch, "version " + std::to_string(m.version));
    }
    m.sensor_id = j.at("sensor").get<std::uint32_t>();
    m.k = j.at("k").get<SampleIndex>();
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "frame") {
      FrameBody b;
      b.v = vec_from_json(j.at("v"));
      for (const auto& [id, i] : j.at("i").items()) b.i_lines[id] = vec_from_json(i);
      m.body = std::move(b);
    } else if (kind == "report") {
      ReportBody b;
      b.seq = j.at("seq").get<std::uint64_t>();
      auto r = j.at("report");
      const double severity = parse_exact(r.at("severity"));
      r["severity"] = 0.0;
      b.report = analytics::report_from_json(r);
      b.report.severity = severity;
      m.body = std::move(b);
    } else if (kind == "heartbeat") {
      m.body = HeartbeatBody{j.at("reports").get<std::uint64_t>()};
    } else if (kind == "hello") {
      const auto role = j.at("role").get<std::string>();
      if (role != "sensor" && role != "central") throw DecodeError(DecodeErrc::BadPayload, "role");
      m.body = HelloBody{role == "sensor" ? Role::Sensor : Role::Central,
                         j.at("reports").get<std::uint64_t>()};
    } else if (kind == "bye") {
      const auto reason = j.at("reason").get<int>();
      if (reason < 0 || reason > 2) throw DecodeError(DecodeErrc::BadPayload, "bye reason");
      m.body = ByeBody{static_cast<ByeReason>(reason), j.at("reports").get<std::uint64_t>()};
    } else {
      throw DecodeError(DecodeErrc::UnknownKind, "kind '" + kind + "'");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DecodeError(DecodeErrc::BadPayload, std::string("json: ") + e.what());
  } catch (const DecodeError&) {
    throw;
  } catch (const DataError& e) {
    throw DecodeError(DecodeErrc::BadPayload, e.what());
  }
}

bool identical(const Message& a, const Message& b) { return encode(a) == encode(b); }

}  // namespace gridwatch::transport
