#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "flowglyph/packet_ingest.hpp"

namespace flowglyph {

inline constexpr double kDefaultIdleTimeout = 300.0;

enum class TlsScanStatus {
  Ok,
  Malformed,         // bytes at a record boundary are not a plausible TLS header
  MissingHeader,     // a record header fell outside the captured bytes
};

std::string_view to_string(TlsScanStatus status);

struct TlsVolume {
  std::uint64_t up_app_bytes = 0;
  std::uint64_t down_app_bytes = 0;
  TlsScanStatus up_status = TlsScanStatus::Ok;
  TlsScanStatus down_status = TlsScanStatus::Ok;
};

/// Bidirectional TCP conversation under one 4-tuple.
struct Session {
  Ipv4 client_ip = 0;
  Ipv4 server_ip = 0;
  std::uint16_t client_port = 0;
  std::uint16_t server_port = 0;
  double first_ts = 0.0;
  double last_ts = 0.0;
  std::uint64_t up_app_bytes = 0;
  std::uint64_t down_app_bytes = 0;
  std::uint64_t frame_count = 0;
  TlsScanStatus tls_status = TlsScanStatus::Ok;  // worse of the two directions

  friend bool operator==(const Session&, const Session&) = default;
};

struct SessionSet {
  std::vector<Session> sessions;
  std::size_t n() const { return sessions.size(); }
};

/// Splits a capture into sessions. Frames are keyed by the direction-independent
/// 4-tuple; a gap above `idle_timeout` seconds, or new traffic after a FIN
/// exchange or RST, opens a new session under the same key. Sessions are listed
/// in order of their first frame.
SessionSet assemble_sessions(const Capture& capture, double idle_timeout = kDefaultIdleTimeout);

/// Same partition as assemble_sessions, returned as frame indices per session.
std::vector<std::vector<std::size_t>> partition_frames(const Capture& capture, double idle_timeout);

/// Sums the bodies of TLS application_data records (content type 23) per
/// direction. `frames` belong to one session in timestamp order; `client_ip`
/// and `client_port` identify the upstream sender.
TlsVolume count_tls_app_bytes(std::span<const FrameRecord* const> frames, Ipv4 client_ip,
                              std::uint16_t client_port);

}  // namespace flowglyph
