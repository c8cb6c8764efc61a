#pragma once

#include <cstdint>
#include <vector>

#include "flowglyph/session_assembly.hpp"

namespace flowglyph {

/// (client IP, server IP, server port): the two-party key that ignores the
/// ephemeral client port.
struct Triplet {
  Ipv4 client_ip = 0;
  Ipv4 server_ip = 0;
  std::uint16_t server_port = 0;

  auto operator<=>(const Triplet&) const = default;
};

struct PartyGroup {
  Triplet triplet;
  std::vector<Session> sessions;  // ordered by (first_ts, client_port)
  std::size_t m_index = 0;
};

struct FeatureSet {
  std::vector<double> first_ts_seq;
  std::vector<double> intervals;  // first_ts[i+1] - last_ts[i], clamped at 0
  std::vector<std::uint64_t> up_bytes;
  std::vector<std::uint64_t> down_bytes;
  Triplet group_ref;
  bool overlapped = false;  // some raw interval was negative before clamping

  std::size_t size() const { return first_ts_seq.size(); }
  bool empty() const { return first_ts_seq.empty(); }

  friend bool operator==(const FeatureSet&, const FeatureSet&) = default;
};

/// Buckets sessions by triplet. Groups come out in ascending triplet order.
std::vector<PartyGroup> group_sessions(const SessionSet& set);

FeatureSet extract_features(const PartyGroup& group);

/// Capture -> sessions -> groups -> features in one call.
std::vector<FeatureSet> features_from_capture(const Capture& capture,
                                              double idle_timeout = kDefaultIdleTimeout);

}  // namespace flowglyph
