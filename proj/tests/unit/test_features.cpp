#include <algorithm>
#include <map>

#include "doctest.h"
#include "flowglyph/error.hpp"
#include "flowglyph/features.hpp"
#include "flowglyph/json_io.hpp"
#include "flowglyph/rng.hpp"
#include "flowglyph/synth.hpp"

using namespace flowglyph;

namespace {

Session session(Ipv4 client, Ipv4 server, std::uint16_t server_port, std::uint16_t client_port, double first, double last,
                std::uint64_t up = 0, std::uint64_t down = 0) {
  Session s;
  s.client_ip = client;
  s.server_ip = server;
  s.server_port = server_port;
  s.client_port = client_port;
  s.first_ts = first;
  s.last_ts = last;
  s.up_app_bytes = up;
  s.down_app_bytes = down;
  s.frame_count = 1;
  return s;
}

PartyGroup group_of(std::vector<std::pair<double, double>> spans) {
  PartyGroup g;
  std::uint16_t port = 50000;
  for (auto [first, last] : spans) g.sessions.push_back(session(1, 2, 443, port++, first, last));
  g.triplet = {1, 2, 443};
  return g;
}

std::vector<Session> random_sessions(Rng& rng, std::size_t count) {
  std::vector<Session> out;
  for (std::size_t i = 0; i < count; ++i) {
    const double first = static_cast<double>(rng.below(1000));
    out.push_back(session(static_cast<Ipv4>(rng.below(3)), static_cast<Ipv4>(10 + rng.below(3)),
                          rng.below(2) ? 443 : 8443, static_cast<std::uint16_t>(40000 + i), first,
                          first + static_cast<double>(rng.below(50)), rng.below(5000), rng.below(5000)));
  }
  return out;
}

}  // namespace

TEST_CASE("five sessions of one party pair form one group") {
  SessionSet set;
  for (std::uint16_t i = 0; i < 5; ++i) set.sessions.push_back(session(7, 9, 443, static_cast<std::uint16_t>(61000 - i * 37), i * 10.0, i * 10.0 + 1));
  const auto groups = group_sessions(set);
  REQUIRE(groups.size() == 1);
  CHECK(groups[0].sessions.size() == 5);
  CHECK(groups[0].triplet == Triplet{7, 9, 443});
  for (std::size_t i = 1; i < 5; ++i) CHECK(groups[0].sessions[i - 1].first_ts < groups[0].sessions[i].first_ts);
}

TEST_CASE("a different server port is a different party") {
  SessionSet set;
  set.sessions = {session(7, 9, 443, 50000, 0, 1), session(7, 9, 8443, 50001, 2, 3)};
  const auto groups = group_sessions(set);
  REQUIRE(groups.size() == 2);
  CHECK(groups[0].triplet.server_port == 443);
  CHECK(groups[1].triplet.server_port == 8443);
  CHECK(groups[0].m_index == 0);
  CHECK(groups[1].m_index == 1);
}

TEST_CASE("grouping ignores input order and conserves sessions") {
  Rng rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    SessionSet set;
    set.sessions = random_sessions(rng, 1 + rng.below(40));
    const auto reference = group_sessions(set);
    SessionSet shuffled = set;
    rng.shuffle(std::span<Session>(shuffled.sessions));
    const auto again = group_sessions(shuffled);
    REQUIRE(again.size() == reference.size());

    std::map<Triplet, std::size_t> distinct;
    for (const auto& s : set.sessions) ++distinct[{s.client_ip, s.server_ip, s.server_port}];
    CHECK(reference.size() == distinct.size());

    std::size_t total = 0;
    for (std::size_t g = 0; g < reference.size(); ++g) {
      CHECK(reference[g].sessions == again[g].sessions);
      CHECK(reference[g].triplet == again[g].triplet);
      if (g > 0) CHECK(reference[g - 1].triplet < reference[g].triplet);
      for (const auto& s : reference[g].sessions) CHECK(Triplet{s.client_ip, s.server_ip, s.server_port} == reference[g].triplet);
      for (std::size_t i = 1; i < reference[g].sessions.size(); ++i) {
        const auto& a = reference[g].sessions[i - 1];
        const auto& b = reference[g].sessions[i];
        CHECK((a.first_ts < b.first_ts || (a.first_ts == b.first_ts && a.client_port < b.client_port)));
      }
      total += reference[g].sessions.size();
    }
    CHECK(total == set.n());
  }
}

TEST_CASE("groups order by triplet with IPs compared as integers") {
  SessionSet set;
  set.sessions = {session(parse_ipv4("10.0.0.10"), 5, 443, 1, 0, 0), session(parse_ipv4("10.0.0.9"), 5, 443, 2, 0, 0),
                  session(parse_ipv4("10.0.0.9"), 4, 443, 3, 0, 0)};
  const auto groups = group_sessions(set);
  REQUIRE(groups.size() == 3);
  CHECK(groups[0].triplet == Triplet{parse_ipv4("10.0.0.9"), 4, 443});
  CHECK(groups[1].triplet == Triplet{parse_ipv4("10.0.0.9"), 5, 443});
  CHECK(groups[2].triplet == Triplet{parse_ipv4("10.0.0.10"), 5, 443});
}

TEST_CASE("intervals run from one session's last frame to the next first frame") {
  const FeatureSet fs = extract_features(group_of({{0, 2}, {10, 12}, {25, 30}}));
  CHECK(fs.intervals == std::vector<double>{8, 13});
  CHECK(fs.first_ts_seq == std::vector<double>{0, 10, 25});
  CHECK_FALSE(fs.overlapped);
}

TEST_CASE("overlapping sessions clamp to zero and flag the set") {
  const FeatureSet fs = extract_features(group_of({{0, 20}, {10, 12}}));
  CHECK(fs.intervals == std::vector<double>{0});
  CHECK(fs.overlapped);
}

TEST_CASE("single-session group") {
  const FeatureSet fs = extract_features(group_of({{4, 5}}));
  CHECK(fs.intervals.empty());
  CHECK(fs.first_ts_seq.size() == 1);
}

TEST_CASE("empty group is rejected") {
  PartyGroup g;
  CHECK_THROWS_AS(extract_features(g), Error);
}

TEST_CASE("volume legs are copied, so the ratio is recoverable") {
  PartyGroup g;
  g.sessions = {session(1, 2, 443, 3, 0, 1, 300, 200), session(1, 2, 443, 4, 5, 6, 90, 0)};
  const FeatureSet fs = extract_features(g);
  CHECK(fs.up_bytes == std::vector<std::uint64_t>{300, 90});
  CHECK(fs.down_bytes == std::vector<std::uint64_t>{200, 0});
  CHECK(static_cast<double>(fs.up_bytes[0]) / static_cast<double>(fs.down_bytes[0]) ==
        static_cast<double>(g.sessions[0].up_app_bytes) / static_cast<double>(g.sessions[0].down_app_bytes));
}

TEST_CASE("feature sets from synthetic captures satisfy the shape invariants") {
  Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const Capture c = synth_group(default_profile(kDefaultProfileNames[trial % 5]), rng.next());
    const auto sets = features_from_capture(c);
    REQUIRE(sets.size() == 1);
    const FeatureSet& fs = sets[0];
    CHECK(fs.up_bytes.size() == fs.size());
    CHECK(fs.down_bytes.size() == fs.size());
    CHECK(fs.intervals.size() == fs.size() - 1);
    CHECK(std::is_sorted(fs.first_ts_seq.begin(), fs.first_ts_seq.end()));
    CHECK(std::all_of(fs.intervals.begin(), fs.intervals.end(), [](double x) { return x >= 0.0; }));
  }
}

TEST_CASE("feature sets survive a JSON round trip") {
  const Capture c = synth_group(default_profile("office"), 4);
  for (const FeatureSet& fs : features_from_capture(c)) {
    const Json j = to_json(fs);
    CHECK(feature_set_from_json(Json::parse(j.dump())) == fs);
  }
}
