#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace flowglyph {

using Ipv4 = std::uint32_t;

std::string format_ipv4(Ipv4 addr);
Ipv4 parse_ipv4(const std::string& text);

namespace tcp_flag {
inline constexpr std::uint8_t kFin = 0x01;
inline constexpr std::uint8_t kSyn = 0x02;
inline constexpr std::uint8_t kRst = 0x04;
inline constexpr std::uint8_t kPsh = 0x08;
inline constexpr std::uint8_t kAck = 0x10;
}  // namespace tcp_flag

/// Seconds since the epoch from a classic pcap (sec, usec) pair. Both the reader
/// and the synthetic generator go through this so timestamps compare exactly.
double timestamp_from(std::uint32_t sec, std::uint32_t usec);

/// One decoded Ethernet/IPv4/TCP frame.
///
/// `payload` holds the captured TCP payload bytes. `wire_payload_len` is the
/// segment length implied by the IPv4 total length, which exceeds
/// `payload.size()` when the capture was sliced below the full frame.
struct FrameRecord {
  double ts = 0.0;
  Ipv4 src_ip = 0;
  Ipv4 dst_ip = 0;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::uint8_t tcp_flags = 0;
  std::uint32_t seq = 0;
  std::vector<std::uint8_t> payload;
  std::uint32_t wire_payload_len = 0;

  bool has(std::uint8_t flag) const { return (tcp_flags & flag) != 0; }

  friend bool operator==(const FrameRecord&, const FrameRecord&) = default;
};

struct IngestStats {
  std::size_t records = 0;  // records present in the file
  std::size_t decoded = 0;
  std::size_t skipped = 0;  // non-IPv4, non-TCP, fragments, malformed headers
};

/// Input traffic: all decoded frames of one capture, in non-decreasing ts order.
struct Capture {
  std::uint32_t link_type = 1;
  std::vector<FrameRecord> frames;
  IngestStats stats;

  friend bool operator==(const Capture& a, const Capture& b) {
    return a.link_type == b.link_type && a.frames == b.frames;
  }
};

inline constexpr std::uint32_t kPcapMagic = 0xa1b2c3d4;
inline constexpr std::uint32_t kLinkTypeEthernet = 1;
inline constexpr std::size_t kPcapGlobalHeaderLen = 24;
inline constexpr std::size_t kPcapRecordHeaderLen = 16;
inline constexpr std::size_t kFrameHeaderLen = 14 + 20 + 20;  // as written
inline constexpr std::size_t kMaxFrameLen = 65535;

/// Parses a classic (microsecond) pcap. Throws Error{BadMagic, Truncated,
/// UnsupportedLinkType}. Frames that are not Ethernet/IPv4/TCP are skipped.
Capture parse_pcap(std::span<const std::uint8_t> bytes);

/// Little-endian classic pcap, version 2.4, link type 1. Throws
/// Error{PayloadTooLarge} when a frame would exceed 65535 bytes on the wire.
std::vector<std::uint8_t> write_pcap(const Capture& capture);

Capture read_pcap_file(const std::string& path);
void write_pcap_file(const std::string& path, const Capture& capture);

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace flowglyph
