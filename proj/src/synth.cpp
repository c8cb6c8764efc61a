#include "flowglyph/synth.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "flowglyph/error.hpp"
#include "json.hpp"

namespace flowglyph {

namespace {

constexpr std::uint8_t kTlsHandshake = 22;
constexpr std::uint8_t kTlsChangeCipherSpec = 20;
constexpr std::uint8_t kTlsApplicationData = 23;
constexpr double kVolumeCeiling = 4e8;

struct RecordSpec {
  std::uint8_t type;
  std::uint32_t body;
};

class FrameBuilder {
 public:
  explicit FrameBuilder(const SessionPlan& plan)
      : plan_(plan), client_seq_(plan.client_isn), server_seq_(plan.server_isn) {}

  void control(std::int64_t t_us, bool from_client, std::uint8_t flags) {
    FrameRecord f = base(t_us, from_client, flags);
    frames_.push_back(std::move(f));
    // SYN and FIN each consume one sequence number
    if (flags & (tcp_flag::kSyn | tcp_flag::kFin)) (from_client ? client_seq_ : server_seq_) += 1;
  }

  void records(std::int64_t t_us, bool from_client, std::initializer_list<RecordSpec> recs) {
    FrameRecord f = base(t_us, from_client, tcp_flag::kPsh | tcp_flag::kAck);
    std::vector<std::uint8_t> bytes;
    for (const RecordSpec& r : recs) {
      bytes.push_back(r.type);
      bytes.push_back(0x03);
      bytes.push_back(0x03);
      bytes.push_back(static_cast<std::uint8_t>(r.body >> 8));
      bytes.push_back(static_cast<std::uint8_t>(r.body));
      // Only the captured prefix is materialised; bodies are zero-filled.
      const std::size_t room = plan_.snap_payload == 0 ? r.body : (bytes.size() < plan_.snap_payload ? plan_.snap_payload - bytes.size() : 0);
      bytes.resize(bytes.size() + std::min<std::size_t>(r.body, room), 0);
      f.wire_payload_len += 5 + r.body;
    }
    if (plan_.snap_payload != 0 && bytes.size() > plan_.snap_payload) bytes.resize(plan_.snap_payload);
    f.payload = std::move(bytes);
    (from_client ? client_seq_ : server_seq_) += f.wire_payload_len;
    frames_.push_back(std::move(f));
  }

  std::vector<FrameRecord> take() { return std::move(frames_); }

 private:
  FrameRecord base(std::int64_t t_us, bool from_client, std::uint8_t flags) const {
    FrameRecord f;
    f.ts = timestamp_from(static_cast<std::uint32_t>(t_us / 1'000'000), static_cast<std::uint32_t>(t_us % 1'000'000));
    f.src_ip = from_client ? plan_.client_ip : plan_.server_ip;
    f.dst_ip = from_client ? plan_.server_ip : plan_.client_ip;
    f.src_port = from_client ? plan_.client_port : plan_.server_port;
    f.dst_port = from_client ? plan_.server_port : plan_.client_port;
    f.tcp_flags = flags;
    f.seq = from_client ? client_seq_ : server_seq_;
    return f;
  }

  const SessionPlan& plan_;
  std::uint32_t client_seq_;
  std::uint32_t server_seq_;
  std::vector<FrameRecord> frames_;
};

void check_range(const IntRange& r, std::int64_t floor, const std::string& what) {
  if (r.min < floor || r.max < r.min) {
    throw Error(ErrorKind::InvalidProfile, what + " range [" + std::to_string(r.min) + ", " + std::to_string(r.max) + "] is invalid");
  }
}

std::uint64_t draw_volume(const LogNormal& model, Rng& rng) {
  const double v = std::exp(model.mu + model.sigma * rng.normal());
  return static_cast<std::uint64_t>(std::clamp(std::llround(v), 1LL, static_cast<long long>(kVolumeCeiling)));
}

std::vector<std::int64_t> session_starts(const IntervalModel& m, std::size_t count, Rng& rng) {
  std::vector<std::int64_t> starts;
  starts.reserve(count);
  double t = 0.0;
  if (m.kind == IntervalModel::Kind::Periodic) {
    for (std::size_t i = 0; i < count; ++i) {
      if (i > 0) t += m.mean * (1.0 + m.jitter * rng.uniform(-1.0, 1.0));
      starts.push_back(std::llround(t * 1e6));
    }
    return starts;
  }
  while (starts.size() < count) {
    if (!starts.empty()) t += 1.0 + rng.exponential(m.gap);
    const auto burst = rng.between(m.burst_size.min, m.burst_size.max);
    for (std::int64_t b = 0; b < burst && starts.size() < count; ++b) {
      if (b > 0) t += rng.uniform(0.2, 2.0);
      starts.push_back(std::llround(t * 1e6));
    }
  }
  return starts;
}

}  // namespace

void ClassProfile::validate() const {
  if (name.empty()) throw Error(ErrorKind::InvalidProfile, "profile needs a name");
  check_range(sessions_per_group, 1, name + " sessions_per_group");
  check_range(records_per_session, 1, name + " records_per_session");
  if (sessions_per_group.max > 16000) throw Error(ErrorKind::InvalidProfile, name + ": too many sessions per group");
  if (!(up_bytes_model.mu > 0.0 && up_bytes_model.sigma > 0.0 && down_bytes_model.mu > 0.0 &&
        down_bytes_model.sigma > 0.0)) {
    throw Error(ErrorKind::InvalidProfile, name + ": volume distribution parameters must be positive");
  }
  const IntervalModel& m = interval_model;
  if (m.kind == IntervalModel::Kind::Periodic) {
    if (!(m.mean > 0.0 && m.jitter >= 0.0 && m.jitter < 1.0)) {
      throw Error(ErrorKind::InvalidProfile, name + ": periodic model needs mean > 0 and jitter in [0, 1)");
    }
  } else {
    check_range(m.burst_size, 1, name + " burst_size");
    if (!(m.gap > 0.0)) throw Error(ErrorKind::InvalidProfile, name + ": bursty gap must be positive");
  }
  if (snap_payload != 0 && snap_payload < 64) {
    throw Error(ErrorKind::InvalidProfile, name + ": snap_payload must be 0 or at least 64");
  }
}

ClassProfile default_profile(const std::string& name) {
  using Kind = IntervalModel::Kind;
  ClassProfile p;
  p.name = name;
  if (name == "apt_cc") {
    p.sessions_per_group = {20, 60};
    p.interval_model = {Kind::Periodic, 30.0, 0.1, {1, 1}, 0.0};
    p.up_bytes_model = {std::log(300.0), 0.3};
    p.down_bytes_model = {std::log(200.0), 0.3};
    p.records_per_session = {1, 3};
  } else if (name == "browser") {
    p.sessions_per_group = {5, 30};
    p.interval_model = {Kind::Bursty, 0.0, 0.0, {2, 6}, 20.0};
    p.up_bytes_model = {std::log(2000.0), 0.8};
    p.down_bytes_model = {std::log(200000.0), 1.0};
    p.records_per_session = {2, 12};
  } else if (name == "mail") {
    p.sessions_per_group = {2, 6};
    p.interval_model = {Kind::Bursty, 0.0, 0.0, {1, 3}, 120.0};
    p.up_bytes_model = {std::log(60000.0), 1.0};
    p.down_bytes_model = {std::log(3000.0), 0.6};
    p.records_per_session = {2, 8};
  } else if (name == "office") {
    p.sessions_per_group = {2, 8};
    p.interval_model = {Kind::Bursty, 0.0, 0.0, {1, 2}, 300.0};
    p.up_bytes_model = {std::log(4000.0), 0.7};
    p.down_bytes_model = {std::log(4000.0), 0.7};
    p.records_per_session = {1, 6};
  } else if (name == "video") {
    p.sessions_per_group = {1, 4};
    p.interval_model = {Kind::Bursty, 0.0, 0.0, {1, 2}, 60.0};
    p.up_bytes_model = {std::log(1500.0), 0.5};
    p.down_bytes_model = {std::log(3e6), 0.6};
    p.records_per_session = {20, 60};
  } else {
    throw Error(ErrorKind::InvalidProfile, "unknown profile '" + name + "'");
  }
  return p;
}

std::vector<std::uint32_t> split_volume(std::uint64_t total, std::int64_t records) {
  auto count = static_cast<std::uint64_t>(std::max<std::int64_t>(1, records));
  count = std::max<std::uint64_t>(count, (total + kMaxRecordBody - 1) / kMaxRecordBody);
  std::vector<std::uint32_t> out(count, static_cast<std::uint32_t>(total / count));
  for (std::uint64_t i = 0; i < total % count; ++i) ++out[i];
  return out;
}

std::vector<FrameRecord> build_session_frames(const SessionPlan& plan) {
  FrameBuilder b(plan);
  const std::int64_t rtt = plan.rtt_us;
  std::int64_t t = plan.start_us;
  b.control(t, true, tcp_flag::kSyn);
  b.control(t + rtt / 2, false, tcp_flag::kSyn | tcp_flag::kAck);
  b.control(t + rtt, true, tcp_flag::kAck);
  b.records(t + rtt + 50, true, {{kTlsHandshake, kClientHelloBody}});
  b.records(t + rtt + rtt / 2, false, {{kTlsHandshake, kServerHelloBody}});
  t += 2 * rtt;
  b.records(t, true, {{kTlsChangeCipherSpec, 1}, {kTlsHandshake, 40}});

  const std::size_t rounds = std::max(plan.up_records.size(), plan.down_records.size());
  for (std::size_t i = 0; i < rounds; ++i) {
    if (i < plan.up_records.size()) {
      t += plan.record_gap_us;
      b.records(t, true, {{kTlsApplicationData, plan.up_records[i]}});
    }
    if (i < plan.down_records.size()) {
      t += plan.record_gap_us;
      b.records(t, false, {{kTlsApplicationData, plan.down_records[i]}});
    }
  }
  t += plan.record_gap_us;
  b.control(t, true, tcp_flag::kFin | tcp_flag::kAck);
  b.control(t + rtt / 2, false, tcp_flag::kFin | tcp_flag::kAck);
  b.control(t + rtt, true, tcp_flag::kAck);
  return b.take();
}

Capture synth_group(const ClassProfile& profile, std::uint64_t seed) {
  profile.validate();
  Rng rng(seed);

  const Ipv4 client_ip = (10u << 24) | static_cast<Ipv4>(rng.below(1u << 16)) << 8 | static_cast<Ipv4>(rng.between(1, 254));
  Ipv4 first_octet;
  do {
    first_octet = static_cast<Ipv4>(rng.between(11, 223));
  } while (first_octet == 127);
  const Ipv4 server_ip = first_octet << 24 | static_cast<Ipv4>(rng.below(1u << 16)) << 8 | static_cast<Ipv4>(rng.between(1, 254));
  const std::int64_t epoch_us = (1'600'000'000LL + static_cast<std::int64_t>(rng.below(100'000'000))) * 1'000'000LL +
                                static_cast<std::int64_t>(rng.below(1'000'000));
  const std::int64_t rtt_us = rng.between(10'000, 120'000);

  const auto count = static_cast<std::size_t>(rng.between(profile.sessions_per_group.min, profile.sessions_per_group.max));
  const auto starts = session_starts(profile.interval_model, count, rng);

  std::set<std::uint16_t> used_ports;
  Capture capture;
  for (std::size_t i = 0; i < count; ++i) {
    SessionPlan plan;
    plan.client_ip = client_ip;
    plan.server_ip = server_ip;
    plan.server_port = profile.server_port;
    do {
      plan.client_port = static_cast<std::uint16_t>(rng.between(49152, 65535));
    } while (!used_ports.insert(plan.client_port).second);
    plan.start_us = epoch_us + starts[i];
    plan.rtt_us = rtt_us;
    plan.record_gap_us = rng.between(5'000, 60'000);
    plan.client_isn = static_cast<std::uint32_t>(rng.next());
    plan.server_isn = static_cast<std::uint32_t>(rng.next());
    const std::uint64_t up = draw_volume(profile.up_bytes_model, rng);
    const std::uint64_t down = draw_volume(profile.down_bytes_model, rng);
    const std::int64_t records = rng.between(profile.records_per_session.min, profile.records_per_session.max);
    plan.up_records = split_volume(up, records);
    plan.down_records = split_volume(down, records);
    plan.snap_payload = profile.snap_payload;
    for (FrameRecord& f : build_session_frames(plan)) capture.frames.push_back(std::move(f));
  }
  std::stable_sort(capture.frames.begin(), capture.frames.end(),
                   [](const FrameRecord& a, const FrameRecord& b) { return a.ts < b.ts; });
  capture.stats.records = capture.stats.decoded = capture.frames.size();
  return capture;
}

void DatasetSpec::validate() const {
  if (profiles.size() < 2) throw Error(ErrorKind::InvalidProfile, "a dataset needs at least 2 class profiles");
  if (groups_per_class < 1) throw Error(ErrorKind::InvalidProfile, "groups_per_class must be at least 1");
  std::set<std::string> names;
  for (const ClassProfile& p : profiles) {
    p.validate();
    if (!names.insert(p.name).second) throw Error(ErrorKind::InvalidProfile, "duplicate profile '" + p.name + "'");
  }
}

std::string synth_dataset(const DatasetSpec& spec) {
  spec.validate();
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(spec.output_dir, ec);
  if (ec) throw Error(ErrorKind::IoFailure, "cannot create '" + spec.output_dir + "': " + ec.message());

  const std::size_t per_class = spec.groups_per_class;
  const std::size_t total = per_class * spec.profiles.size();
  std::vector<std::string> paths(total);
  for (std::size_t job = 0; job < total; ++job) {
    std::ostringstream name;
    name << spec.profiles[job / per_class].name << '_' << std::setw(5) << std::setfill('0') << job % per_class << ".pcap";
    paths[job] = (fs::path(spec.output_dir) / name.str()).string();
  }

  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t job = 0; job < static_cast<std::ptrdiff_t>(total); ++job) {
    try {
      const std::size_t cls = static_cast<std::size_t>(job) / per_class;
      const std::size_t idx = static_cast<std::size_t>(job) % per_class;
      const std::uint64_t seed = derive_seed(derive_seed(spec.seed, cls), idx);
      write_pcap_file(paths[static_cast<std::size_t>(job)], synth_group(spec.profiles[cls], seed));
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  const std::string manifest = (fs::path(spec.output_dir) / "manifest.jsonl").string();
  std::ofstream out(manifest, std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoFailure, "cannot create '" + manifest + "'");
  for (std::size_t job = 0; job < total; ++job) {
    nlohmann::ordered_json line;
    line["path"] = paths[job];
    line["label"] = spec.profiles[job / per_class].name;
    out << line.dump() << '\n';
  }
  if (!out) throw Error(ErrorKind::IoFailure, "write failed for '" + manifest + "'");
  return manifest;
}

}  // namespace flowglyph
