#include "flowglyph/session_assembly.hpp"

#include <algorithm>
#include <map>
#include <unordered_set>

namespace flowglyph {

namespace {

using EndpointKey = std::uint64_t;  // ip << 16 | port

EndpointKey endpoint(Ipv4 ip, std::uint16_t port) {
  return static_cast<EndpointKey>(ip) << 16 | port;
}

struct FlowKey {
  EndpointKey low;
  EndpointKey high;
  auto operator<=>(const FlowKey&) const = default;
};

FlowKey flow_key(const FrameRecord& f) {
  const EndpointKey a = endpoint(f.src_ip, f.src_port);
  const EndpointKey b = endpoint(f.dst_ip, f.dst_port);
  return a < b ? FlowKey{a, b} : FlowKey{b, a};
}

struct OpenSession {
  std::vector<std::size_t> frames;
  double last_ts = 0.0;
  bool fin_low = false;
  bool fin_high = false;
  bool closed = false;
};

constexpr std::size_t kTlsHeaderLen = 5;
constexpr std::uint32_t kMaxTlsRecordBody = 16384 + 2048;
constexpr std::uint8_t kTlsApplicationData = 23;

class RecordScanner {
 public:
  void feed(const FrameRecord& f) {
    const std::size_t wire = f.wire_payload_len;
    const std::size_t captured = f.payload.size();
    std::size_t off = 0;
    while (off < wire && status_ == TlsScanStatus::Ok) {
      if (body_left_ > 0) {
        const std::size_t take = std::min<std::size_t>(body_left_, wire - off);
        if (body_is_app_) app_bytes_ += take;
        body_left_ -= take;
        off += take;
        continue;
      }
      if (off >= captured) {
        status_ = TlsScanStatus::MissingHeader;
        break;
      }
      header_[have_++] = f.payload[off++];
      if (have_ == kTlsHeaderLen) start_record();
    }
  }

  std::uint64_t app_bytes() const { return app_bytes_; }
  TlsScanStatus status() const { return status_; }

 private:
  void start_record() {
    have_ = 0;
    const std::uint8_t type = header_[0];
    const std::uint32_t length = static_cast<std::uint32_t>(header_[3]) << 8 | header_[4];
    const bool plausible = type >= 20 && type <= 24 && header_[1] == 3 && header_[2] <= 4 &&
                           length <= kMaxTlsRecordBody;
    if (!plausible) {
      status_ = TlsScanStatus::Malformed;
      return;
    }
    body_left_ = length;
    body_is_app_ = type == kTlsApplicationData;
  }

  std::uint8_t header_[kTlsHeaderLen] = {};
  std::size_t have_ = 0;
  std::uint64_t body_left_ = 0;
  bool body_is_app_ = false;
  std::uint64_t app_bytes_ = 0;
  TlsScanStatus status_ = TlsScanStatus::Ok;
};

TlsScanStatus worse(TlsScanStatus a, TlsScanStatus b) {
  return static_cast<int>(a) >= static_cast<int>(b) ? a : b;
}

}  // namespace

std::string_view to_string(TlsScanStatus status) {
  switch (status) {
    case TlsScanStatus::Ok: return "ok";
    case TlsScanStatus::Malformed: return "malformed";
    case TlsScanStatus::MissingHeader: return "missing_header";
  }
  return "unknown";
}

TlsVolume count_tls_app_bytes(std::span<const FrameRecord* const> frames, Ipv4 client_ip,
                              std::uint16_t client_port) {
  RecordScanner up;
  RecordScanner down;
  std::unordered_set<std::uint32_t> seen_up;
  std::unordered_set<std::uint32_t> seen_down;
  for (const FrameRecord* f : frames) {
    if (f->wire_payload_len == 0) continue;
    const bool upstream = f->src_ip == client_ip && f->src_port == client_port;
    auto& seen = upstream ? seen_up : seen_down;
    if (!seen.insert(f->seq).second) continue;  // exact retransmission
    (upstream ? up : down).feed(*f);
  }
  return TlsVolume{up.app_bytes(), down.app_bytes(), up.status(), down.status()};
}

std::vector<std::vector<std::size_t>> partition_frames(const Capture& capture, double idle_timeout) {
  std::vector<OpenSession> building;
  std::map<FlowKey, std::size_t> active;

  for (std::size_t i = 0; i < capture.frames.size(); ++i) {
    const FrameRecord& f = capture.frames[i];
    const FlowKey key = flow_key(f);
    auto it = active.find(key);
    bool fresh = it == active.end();
    if (!fresh) {
      const OpenSession& open = building[it->second];
      if (f.ts - open.last_ts > idle_timeout) {
        fresh = true;
      } else if (open.closed && (f.has(tcp_flag::kSyn) || f.wire_payload_len > 0)) {
        // Bare ACK/FIN/RST stragglers still belong to the finished session.
        fresh = true;
      }
    }
    if (fresh) {
      building.emplace_back();
      it = active.insert_or_assign(key, building.size() - 1).first;
    }
    OpenSession& s = building[it->second];
    s.frames.push_back(i);
    s.last_ts = f.ts;
    if (f.has(tcp_flag::kFin)) {
      (endpoint(f.src_ip, f.src_port) == key.low ? s.fin_low : s.fin_high) = true;
    }
    if (f.has(tcp_flag::kRst) || (s.fin_low && s.fin_high)) s.closed = true;
  }

  std::vector<std::vector<std::size_t>> out;
  out.reserve(building.size());
  for (auto& s : building) out.push_back(std::move(s.frames));
  return out;
}

SessionSet assemble_sessions(const Capture& capture, double idle_timeout) {
  SessionSet set;
  for (const auto& indices : partition_frames(capture, idle_timeout)) {
    std::vector<const FrameRecord*> frames;
    frames.reserve(indices.size());
    for (std::size_t idx : indices) frames.push_back(&capture.frames[idx]);

    const FrameRecord* opener = frames.front();
    for (const FrameRecord* f : frames) {
      if (f->has(tcp_flag::kSyn) && !f->has(tcp_flag::kAck)) {
        opener = f;
        break;
      }
    }

    Session s;
    s.client_ip = opener->src_ip;
    s.client_port = opener->src_port;
    s.server_ip = opener->dst_ip;
    s.server_port = opener->dst_port;
    s.first_ts = frames.front()->ts;
    s.last_ts = frames.front()->ts;
    for (const FrameRecord* f : frames) {
      s.first_ts = std::min(s.first_ts, f->ts);
      s.last_ts = std::max(s.last_ts, f->ts);
    }
    s.frame_count = frames.size();
    const TlsVolume volume = count_tls_app_bytes(frames, s.client_ip, s.client_port);
    s.up_app_bytes = volume.up_app_bytes;
    s.down_app_bytes = volume.down_app_bytes;
    s.tls_status = worse(volume.up_status, volume.down_status);
    set.sessions.push_back(s);
  }
  return set;
}

}  // namespace flowglyph
