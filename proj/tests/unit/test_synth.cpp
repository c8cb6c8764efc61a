#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "doctest.h"
#include "flowglyph/error.hpp"
#include "flowglyph/features.hpp"
#include "flowglyph/json_io.hpp"
#include "flowglyph/rng.hpp"
#include "flowglyph/synth.hpp"
#include "support.hpp"

using namespace flowglyph;
namespace fs = std::filesystem;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::InvalidArgument;
}

double coefficient_of_variation(const std::vector<double>& xs) {
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  return std::sqrt(var / static_cast<double>(xs.size())) / mean;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST_CASE("apt_cc groups are periodic heartbeats") {
  Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const auto sets = features_from_capture(synth_group(default_profile("apt_cc"), rng.next()));
    REQUIRE(sets.size() == 1);
    CHECK(sets[0].size() >= 20);
    CHECK(sets[0].size() <= 60);
    CHECK(coefficient_of_variation(sets[0].intervals) < 0.2);
  }
}

TEST_CASE("a fixed seed gives byte-identical pcaps") {
  for (const auto& name : kDefaultProfileNames) {
    CHECK(write_pcap(synth_group(default_profile(name), 123)) == write_pcap(synth_group(default_profile(name), 123)));
  }
  CHECK_FALSE(write_pcap(synth_group(default_profile("mail"), 1)) == write_pcap(synth_group(default_profile("mail"), 2)));
}

TEST_CASE("a forced session count is honored") {
  ClassProfile p = default_profile("browser");
  p.sessions_per_group = {5, 5};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto sets = features_from_capture(synth_group(p, seed));
    REQUIRE(sets.size() == 1);
    CHECK(sets[0].size() == 5);
  }
}

TEST_CASE("every default profile closes through the pipeline") {
  Rng rng(32);
  for (const auto& name : kDefaultProfileNames) {
    const ClassProfile p = default_profile(name);
    for (int trial = 0; trial < 8; ++trial) {
      const Capture c = parse_pcap(write_pcap(synth_group(p, rng.next())));
      const SessionSet sessions = assemble_sessions(c);
      const auto groups = group_sessions(sessions);
      REQUIRE(groups.size() == 1);
      CHECK(static_cast<std::int64_t>(groups[0].sessions.size()) >= p.sessions_per_group.min);
      CHECK(static_cast<std::int64_t>(groups[0].sessions.size()) <= p.sessions_per_group.max);
      CHECK(groups[0].triplet.server_port == p.server_port);
      for (const Session& s : sessions.sessions) {
        CHECK(s.tls_status == TlsScanStatus::Ok);
        CHECK(s.up_app_bytes > 0);
        CHECK(s.down_app_bytes > 0);
      }
    }
  }
}

TEST_CASE("default apt_cc and browser up/down ratios differ by at least 5x") {
  auto mean_ratio = [](const std::string& name) {
    Rng rng(33);
    double sum = 0.0;
    int count = 0;
    for (int trial = 0; trial < 40; ++trial) {
      for (const FeatureSet& fs : features_from_capture(synth_group(default_profile(name), rng.next()))) {
        for (std::size_t i = 0; i < fs.size(); ++i) {
          sum += static_cast<double>(fs.up_bytes[i]) / static_cast<double>(fs.down_bytes[i]);
          ++count;
        }
      }
    }
    return sum / count;
  };
  const double apt = mean_ratio("apt_cc");
  const double browser = mean_ratio("browser");
  CHECK(std::max(apt, browser) / std::min(apt, browser) >= 5.0);
}

TEST_CASE("session frames follow the handshake, records, teardown layout") {
  SessionPlan plan;
  plan.client_ip = 1;
  plan.server_ip = 2;
  plan.client_port = 50000;
  plan.start_us = 1'000'000;
  plan.up_records = {10, 20};
  plan.down_records = {30};
  const auto frames = build_session_frames(plan);
  REQUIRE(frames.size() == 3 + 2 + 1 + 3 + 3);
  CHECK(frames[0].tcp_flags == tcp_flag::kSyn);
  CHECK(frames[1].tcp_flags == (tcp_flag::kSyn | tcp_flag::kAck));
  CHECK(frames[3].payload[0] == 22);
  CHECK(frames[3].wire_payload_len == 5 + kClientHelloBody);
  CHECK(frames[4].wire_payload_len == 5 + kServerHelloBody);
  CHECK(frames[5].payload[0] == 20);
  CHECK(frames[6].payload[0] == 23);
  CHECK(frames[6].wire_payload_len == 15);
  CHECK(frames[7].src_ip == 2);
  CHECK(frames[7].wire_payload_len == 35);
  CHECK(frames[8].wire_payload_len == 25);
  CHECK(frames[9].has(tcp_flag::kFin));
  CHECK(frames[10].has(tcp_flag::kFin));
  for (std::size_t i = 1; i < frames.size(); ++i) CHECK(frames[i - 1].ts <= frames[i].ts);
  // Client sequence numbers advance by the bytes and flags it sent.
  CHECK(frames[3].seq == plan.client_isn + 1);
  CHECK(frames[5].seq == plan.client_isn + 1 + 5 + kClientHelloBody);
}

TEST_CASE("sliced payloads keep record headers") {
  SessionPlan plan;
  plan.up_records = {5000};
  plan.down_records = {70};
  plan.snap_payload = 64;
  const auto frames = build_session_frames(plan);
  for (const auto& f : frames) {
    CHECK(f.payload.size() <= 64);
    CHECK(f.payload.size() <= f.wire_payload_len);
    if (f.wire_payload_len > 0) CHECK(f.payload.size() >= 5);
  }
}

TEST_CASE("split_volume spreads bytes evenly under the record ceiling") {
  CHECK(split_volume(10, 3) == std::vector<std::uint32_t>{4, 3, 3});
  CHECK(split_volume(0, 2) == std::vector<std::uint32_t>{0, 0});
  const auto big = split_volume(100'000, 2);
  CHECK(big.size() == 7);
  CHECK(std::accumulate(big.begin(), big.end(), std::uint64_t{0}) == 100'000);
  for (auto r : big) CHECK(r <= kMaxRecordBody);
}

TEST_CASE("profile validation") {
  CHECK(kind_of([] { default_profile("nope"); }) == ErrorKind::InvalidProfile);
  ClassProfile p = default_profile("office");
  p.sessions_per_group = {3, 2};
  CHECK(kind_of([&] { p.validate(); }) == ErrorKind::InvalidProfile);
  p = default_profile("office");
  p.up_bytes_model.sigma = 0.0;
  CHECK(kind_of([&] { synth_group(p, 1); }) == ErrorKind::InvalidProfile);
  p = default_profile("apt_cc");
  p.interval_model.jitter = 1.5;
  CHECK(kind_of([&] { p.validate(); }) == ErrorKind::InvalidProfile);
}

TEST_CASE("datasets: counts, manifest and determinism") {
  testing::TempDir dir;
  DatasetSpec spec;
  spec.groups_per_class = 10;
  spec.profiles = {default_profile("apt_cc"), default_profile("video")};
  spec.seed = 77;
  spec.output_dir = dir.file("a");
  const std::string manifest = synth_dataset(spec);
  const auto lines = read_lines(manifest);
  CHECK(lines.size() == 20);
  std::size_t pcaps = 0;
  for (const auto& e : fs::directory_iterator(spec.output_dir)) pcaps += e.path().extension() == ".pcap";
  CHECK(pcaps == 20);
  const Json first = Json::parse(lines.front());
  CHECK(first.at("label") == "apt_cc");
  CHECK(Json::parse(lines.back()).at("label") == "video");
  CHECK(fs::exists(first.at("path").get<std::string>()));

  spec.output_dir = dir.file("b");
  const auto again = read_lines(synth_dataset(spec));
  REQUIRE(again.size() == 20);
  for (std::size_t i = 0; i < 20; ++i) {
    const auto pa = Json::parse(lines[i]).at("path").get<std::string>();
    const auto pb = Json::parse(again[i]).at("path").get<std::string>();
    CHECK(fs::path(pa).filename() == fs::path(pb).filename());
    CHECK(read_file_bytes(pa) == read_file_bytes(pb));
  }
}

TEST_CASE("datasets need two profiles") {
  DatasetSpec spec;
  spec.profiles = {default_profile("apt_cc")};
  CHECK(kind_of([&] { synth_dataset(spec); }) == ErrorKind::InvalidProfile);
  spec.profiles.push_back(default_profile("apt_cc"));
  CHECK(kind_of([&] { spec.validate(); }) == ErrorKind::InvalidProfile);
}

TEST_CASE("dataset specs from JSON override defaults") {
  const Json j = Json::parse(R"({
    "groups_per_class": 3, "seed": 9, "output_dir": "x",
    "profiles": ["browser", {"name": "apt_cc", "sessions_per_group": [4, 4],
                              "interval_model": {"mean": 60}, "up_bytes_model": {"median": 500, "sigma": 0.2}}]
  })");
  const DatasetSpec spec = dataset_spec_from_json(j);
  CHECK(spec.groups_per_class == 3);
  CHECK(spec.seed == 9);
  REQUIRE(spec.profiles.size() == 2);
  CHECK(spec.profiles[0].name == "browser");
  CHECK(spec.profiles[1].sessions_per_group.min == 4);
  CHECK(spec.profiles[1].interval_model.mean == 60.0);
  CHECK(spec.profiles[1].interval_model.jitter == doctest::Approx(0.1));
  CHECK(spec.profiles[1].up_bytes_model.mu == doctest::Approx(std::log(500.0)));
  CHECK(dataset_spec_from_json(Json::object()).profiles.size() == 5);
  CHECK(kind_of([] { dataset_spec_from_json(Json::parse(R"({"profiles": [{"name": "x"}]})")); }) ==
        ErrorKind::InvalidProfile);
  const ClassProfile back = profile_from_json(to_json(default_profile("video")), ClassProfile{});
  CHECK(back.down_bytes_model.mu == default_profile("video").down_bytes_model.mu);
  CHECK(back.records_per_session.max == default_profile("video").records_per_session.max);
}
