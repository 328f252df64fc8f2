// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "gridwatch/analytics/engine.hpp"
#include "gridwatch/analytics/report.hpp"
#include "gridwatch/error.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace gridwatch::transport {

inline constexpr std::uint8_t kProtocolVersion = 1;
inline constexpr std::uint16_t kDefaultPort = 7435;
/// Largest accepted value of the length prefix.
inline constexpr std::uint32_t kMaxMessageBytes = 1u << 20;
/// Bytes covered by the length prefix besides the payload:
/// version, kind, reserved, sensor id, k and the trailing CRC.
inline constexpr std::uint32_t kEnvelopeBytes = 1 + 1 + 2 + 4 + 8 + 4;

enum class Kind : std::uint8_t { Frame = 1, Report = 2, Heartbeat = 3, Hello = 4, Bye = 5 };

std::string_view to_string(Kind kind);

/// Phasors of one sample. The sample index and bus travel in the envelope.
struct FrameBody {
  Vec3c v = Vec3c::Zero();
  std::map<std::string, Vec3c> i_lines;
};

/// `seq` numbers the reports of one sensor from 0 without gaps.
struct ReportBody {
  std::uint64_t seq = 0;
  analytics::AnomalyReport report;
};

/// Liveness plus progress. From a sensor: `reports` produced so far, envelope
/// k = last frame sent. From the central side: acknowledgement, `reports`
/// received so far, envelope k = last frame received in order.
struct HeartbeatBody {
  std::uint64_t reports = 0;
};

enum class Role : std::uint8_t { Sensor = 0, Central = 1 };

/// Session handshake. The central reply carries the resume point: envelope
/// k = last frame received from this sensor (-1 if none) and `reports`
/// received so far.
struct HelloBody {
  Role role = Role::Sensor;
  std::uint64_t reports = 0;
};

enum class ByeReason : std::uint8_t { Finished = 0, Rejected = 1, Shutdown = 2 };

/// End of a session. From a sensor with reason Finished: no frames after
/// envelope k and `reports` in total.
struct ByeBody {
  ByeReason reason = ByeReason::Finished;
  std::uint64_t reports = 0;
};

using Body = std::variant<FrameBody, ReportBody, HeartbeatBody, HelloBody, ByeBody>;

struct Message {
  std::uint8_t version = kProtocolVersion;
  std::uint32_t sensor_id = 0;
  SampleIndex k = 0;
  Body body;

  Kind kind() const;
};

Message make_frame(const analytics::PhasorFrame& frame);
/// Inverse of make_frame; requires kind() == Frame.
analytics::PhasorFrame to_phasor_frame(const Message& m);

enum class DecodeErrc {
  Truncated,        ///< fewer bytes than the header or the length prefix says
  TooLarge,         ///< length prefix above kMaxMessageBytes
  BadLength,        ///< length prefix smaller than the envelope
  VersionMismatch,
  UnknownKind,
  Checksum,
  BadPayload,       ///< payload does not parse or has trailing bytes
};

std::string_view to_string(DecodeErrc code);

class DecodeError : public DataError {
 public:
  DecodeError(DecodeErrc code, const std::string& what);
  DecodeErrc code() const { return code_; }

 private:
  DecodeErrc code_;
};

/// Length-prefixed little-endian frame:
///   u32 length | u8 version | u8 kind | u16 reserved | u32 sensor | i64 k |
///   payload | u32 crc32(version..payload)
/// `length` counts every byte after itself.
std::vector<std::uint8_t> encode(const Message& m);

/// Decodes exactly one message occupying all of `bytes`. Throws DecodeError.
Message decode(std::span<const std::uint8_t> bytes);

/// Reads the length prefix of a buffered stream. Returns the total size of
/// the next message (prefix included) once at least 4 bytes are present.
/// Throws DecodeError for an oversized or undersized prefix.
std::optional<std::size_t> peek_message_size(std::span<const std::uint8_t> bytes);

/// Debug text form: one JSON object, doubles printed round-trip exact.
std::string encode_json(const Message& m);
/// Throws DecodeError.
Message decode_json(std::string_view text);

/// True when both messages encode to the same bytes (bit-exact doubles).
bool identical(const Message& a, const Message& b);

}  // namespace gridwatch::transport
