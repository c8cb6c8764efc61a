#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flowglyph/packet_ingest.hpp"
#include "flowglyph/rng.hpp"

namespace flowglyph {

struct IntRange {
  std::int64_t min = 1;
  std::int64_t max = 1;
};

/// Log-normal over bytes: exp(mu + sigma * z).
struct LogNormal {
  double mu = 0.0;
  double sigma = 1.0;
};

struct IntervalModel {
  enum class Kind { Periodic, Bursty };
  Kind kind = Kind::Periodic;
  // periodic: consecutive session starts are mean * (1 +- jitter) seconds apart
  double mean = 30.0;
  double jitter = 0.1;
  // bursty: bursts of burst_size sessions 0.2-2 s apart, bursts separated by
  // 1 s plus an exponential gap with mean `gap`
  IntRange burst_size{1, 1};
  double gap = 60.0;
};

/// Traffic shape of one synthetic class. Volumes are per session and per
/// direction, split evenly over the session's application records.
struct ClassProfile {
  std::string name;
  IntRange sessions_per_group{1, 1};
  IntervalModel interval_model;
  LogNormal up_bytes_model;
  LogNormal down_bytes_model;
  IntRange records_per_session{1, 1};
  std::uint16_t server_port = 443;
  // Captured TCP payload per frame; 0 keeps whole segments. Record headers
  // always start a segment, so slicing never hides them.
  std::uint32_t snap_payload = 64;

  void validate() const;
};

inline const std::vector<std::string> kDefaultProfileNames = {"apt_cc", "browser", "mail", "office", "video"};

/// Throws Error{InvalidProfile} for an unknown name.
ClassProfile default_profile(const std::string& name);

/// One TLS-over-TCP conversation to synthesize. Record sizes are TLS
/// application_data body lengths in bytes.
struct SessionPlan {
  Ipv4 client_ip = 0;
  Ipv4 server_ip = 0;
  std::uint16_t client_port = 0;
  std::uint16_t server_port = 443;
  std::int64_t start_us = 0;  // microseconds since the epoch
  std::int64_t rtt_us = 40'000;
  std::int64_t record_gap_us = 20'000;
  std::uint32_t client_isn = 1000;
  std::uint32_t server_isn = 5000;
  std::vector<std::uint32_t> up_records;
  std::vector<std::uint32_t> down_records;
  std::uint32_t snap_payload = 0;
};

inline constexpr std::uint32_t kClientHelloBody = 512;
inline constexpr std::uint32_t kServerHelloBody = 2800;
inline constexpr std::uint32_t kMaxRecordBody = 16384;

/// Handshake, dummy TLS handshake records, application records (alternating
/// up/down), then FIN teardown. Frames come out in timestamp order.
std::vector<FrameRecord> build_session_frames(const SessionPlan& plan);

/// Splits `total` bytes over at least `records` bodies of at most 16384 bytes.
std::vector<std::uint32_t> split_volume(std::uint64_t total, std::int64_t records);

/// Traffic of one party group drawn from `profile`; deterministic in `seed`.
Capture synth_group(const ClassProfile& profile, std::uint64_t seed);

struct DatasetSpec {
  std::size_t groups_per_class = 10;
  std::vector<ClassProfile> profiles;
  std::uint64_t seed = 1;
  std::string output_dir = "dataset";

  void validate() const;
};

/// Writes one pcap per (profile, group) plus `manifest.jsonl` in output_dir and
/// returns the manifest path.
std::string synth_dataset(const DatasetSpec& spec);

}  // namespace flowglyph
