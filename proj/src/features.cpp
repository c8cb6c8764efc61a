#include "flowglyph/features.hpp"

#include <algorithm>
#include <map>

#include "flowglyph/error.hpp"

namespace flowglyph {

std::vector<PartyGroup> group_sessions(const SessionSet& set) {
  std::map<Triplet, std::vector<Session>> buckets;
  for (const Session& s : set.sessions) {
    buckets[Triplet{s.client_ip, s.server_ip, s.server_port}].push_back(s);
  }

  std::vector<PartyGroup> groups;
  groups.reserve(buckets.size());
  for (auto& [triplet, sessions] : buckets) {
    std::sort(sessions.begin(), sessions.end(), [](const Session& a, const Session& b) {
      if (a.first_ts != b.first_ts) return a.first_ts < b.first_ts;
      return a.client_port < b.client_port;
    });
    groups.push_back(PartyGroup{triplet, std::move(sessions), groups.size()});
  }
  return groups;
}

FeatureSet extract_features(const PartyGroup& group) {
  if (group.sessions.empty()) {
    throw Error(ErrorKind::EmptyFeatureSet, "party group has no sessions");
  }
  FeatureSet fs;
  fs.group_ref = group.triplet;
  const std::size_t n = group.sessions.size();
  fs.first_ts_seq.reserve(n);
  fs.up_bytes.reserve(n);
  fs.down_bytes.reserve(n);
  for (const Session& s : group.sessions) {
    fs.first_ts_seq.push_back(s.first_ts);
    fs.up_bytes.push_back(s.up_app_bytes);
    fs.down_bytes.push_back(s.down_app_bytes);
  }
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double raw = group.sessions[i + 1].first_ts - group.sessions[i].last_ts;
    if (raw < 0.0) fs.overlapped = true;
    fs.intervals.push_back(std::max(0.0, raw));
  }
  return fs;
}

std::vector<FeatureSet> features_from_capture(const Capture& capture, double idle_timeout) {
  std::vector<FeatureSet> out;
  for (const PartyGroup& g : group_sessions(assemble_sessions(capture, idle_timeout))) {
    out.push_back(extract_features(g));
  }
  return out;
}

}  // namespace flowglyph
