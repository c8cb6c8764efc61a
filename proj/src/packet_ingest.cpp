#include "flowglyph/packet_ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "flowglyph/error.hpp"

namespace flowglyph {

namespace {

class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> bytes, bool swapped) : bytes_(bytes), swapped_(swapped) {}

  std::uint32_t u32(std::size_t off) const {
    std::uint32_t v = static_cast<std::uint32_t>(bytes_[off]) |
                      static_cast<std::uint32_t>(bytes_[off + 1]) << 8 |
                      static_cast<std::uint32_t>(bytes_[off + 2]) << 16 |
                      static_cast<std::uint32_t>(bytes_[off + 3]) << 24;
    return swapped_ ? __builtin_bswap32(v) : v;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  bool swapped_;
};

std::uint16_t be16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] << 8 | p[1]);
}

std::uint32_t be32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) << 24 | static_cast<std::uint32_t>(p[1]) << 16 |
         static_cast<std::uint32_t>(p[2]) << 8 | p[3];
}

void put_le16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_le32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_be16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 3; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint16_t ipv4_checksum(const std::uint8_t* header, std::size_t len) {
  std::uint32_t sum = 0;
  for (std::size_t i = 0; i + 1 < len; i += 2) sum += be16(header + i);
  while (sum >> 16) sum = (sum & 0xffff) + (sum >> 16);
  return static_cast<std::uint16_t>(~sum);
}

// Decodes one link-layer frame; returns false when the frame is not a complete
// unfragmented Ethernet/IPv4/TCP header stack.
bool decode_frame(std::span<const std::uint8_t> data, FrameRecord& out) {
  constexpr std::size_t kEth = 14;
  if (data.size() < kEth + 20) return false;
  if (be16(data.data() + 12) != 0x0800) return false;

  const std::uint8_t* ip = data.data() + kEth;
  if ((ip[0] >> 4) != 4) return false;
  const std::size_t ihl = static_cast<std::size_t>(ip[0] & 0x0f) * 4;
  if (ihl < 20 || data.size() < kEth + ihl) return false;
  if (ip[9] != 6) return false;
  const std::uint16_t frag = be16(ip + 6);
  if ((frag & 0x2000) != 0 || (frag & 0x1fff) != 0) return false;
  const std::size_t total_len = be16(ip + 2);
  if (total_len < ihl + 20) return false;

  const std::uint8_t* tcp = ip + ihl;
  if (data.size() < kEth + ihl + 20) return false;
  const std::size_t doff = static_cast<std::size_t>(tcp[12] >> 4) * 4;
  if (doff < 20 || total_len < ihl + doff || data.size() < kEth + ihl + doff) return false;

  out.src_ip = be32(ip + 12);
  out.dst_ip = be32(ip + 16);
  out.src_port = be16(tcp);
  out.dst_port = be16(tcp + 2);
  out.seq = be32(tcp + 4);
  out.tcp_flags = tcp[13];
  out.wire_payload_len = static_cast<std::uint32_t>(total_len - ihl - doff);

  // Trailing Ethernet padding is not payload; the IPv4 total length bounds it.
  const std::size_t header_end = kEth + ihl + doff;
  const std::size_t captured = std::min<std::size_t>(data.size() - header_end, out.wire_payload_len);
  out.payload.assign(data.begin() + static_cast<std::ptrdiff_t>(header_end),
                     data.begin() + static_cast<std::ptrdiff_t>(header_end + captured));
  return true;
}

}  // namespace

std::string format_ipv4(Ipv4 addr) {
  std::ostringstream os;
  os << (addr >> 24) << '.' << ((addr >> 16) & 0xff) << '.' << ((addr >> 8) & 0xff) << '.'
     << (addr & 0xff);
  return os.str();
}

Ipv4 parse_ipv4(const std::string& text) {
  Ipv4 addr = 0;
  int parts = 0;
  std::size_t pos = 0;
  while (parts < 4) {
    std::size_t used = 0;
    unsigned long octet = 0;
    try {
      octet = std::stoul(text.substr(pos), &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || octet > 255) break;
    addr = addr << 8 | static_cast<Ipv4>(octet);
    pos += used;
    ++parts;
    if (parts < 4) {
      if (pos >= text.size() || text[pos] != '.') break;
      ++pos;
    }
  }
  if (parts != 4 || pos != text.size()) {
    throw Error(ErrorKind::InvalidArgument, "not an IPv4 address: '" + text + "'");
  }
  return addr;
}

double timestamp_from(std::uint32_t sec, std::uint32_t usec) {
  return static_cast<double>(sec) + static_cast<double>(usec) * 1e-6;
}

Capture parse_pcap(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kPcapGlobalHeaderLen) {
    throw Error(ErrorKind::Truncated, "pcap global header needs 24 bytes, got " + std::to_string(bytes.size()));
  }
  const ByteReader native(bytes, false);
  const std::uint32_t magic = native.u32(0);
  bool swapped = false;
  if (magic == kPcapMagic) {
    swapped = false;
  } else if (magic == __builtin_bswap32(kPcapMagic)) {
    swapped = true;
  } else {
    std::ostringstream os;
    os << "unrecognised pcap magic 0x" << std::hex << magic;
    throw Error(ErrorKind::BadMagic, os.str());
  }
  const ByteReader rd(bytes, swapped);

  Capture capture;
  capture.link_type = rd.u32(20);
  if (capture.link_type != kLinkTypeEthernet) {
    throw Error(ErrorKind::UnsupportedLinkType, "link type " + std::to_string(capture.link_type));
  }

  std::size_t off = kPcapGlobalHeaderLen;
  while (off < bytes.size()) {
    if (bytes.size() - off < kPcapRecordHeaderLen) {
      throw Error(ErrorKind::Truncated, "record header at offset " + std::to_string(off));
    }
    const std::uint32_t ts_sec = rd.u32(off);
    const std::uint32_t ts_usec = rd.u32(off + 4);
    const std::uint32_t incl_len = rd.u32(off + 8);
    off += kPcapRecordHeaderLen;
    if (bytes.size() - off < incl_len) {
      throw Error(ErrorKind::Truncated, "record body at offset " + std::to_string(off) +
                                            " needs " + std::to_string(incl_len) + " bytes");
    }
    ++capture.stats.records;
    FrameRecord frame;
    if (decode_frame(bytes.subspan(off, incl_len), frame)) {
      frame.ts = timestamp_from(ts_sec, ts_usec);
      capture.frames.push_back(std::move(frame));
      ++capture.stats.decoded;
    } else {
      ++capture.stats.skipped;
    }
    off += incl_len;
  }

  std::stable_sort(capture.frames.begin(), capture.frames.end(),
                   [](const FrameRecord& a, const FrameRecord& b) { return a.ts < b.ts; });
  return capture;
}

std::vector<std::uint8_t> write_pcap(const Capture& capture) {
  std::vector<std::uint8_t> out;
  put_le32(out, kPcapMagic);
  put_le16(out, 2);
  put_le16(out, 4);
  put_le32(out, 0);  // thiszone
  put_le32(out, 0);  // sigfigs
  put_le32(out, 65535);
  put_le32(out, kLinkTypeEthernet);

  for (const FrameRecord& f : capture.frames) {
    const std::size_t wire_len = kFrameHeaderLen + f.wire_payload_len;
    if (wire_len > kMaxFrameLen || f.payload.size() > f.wire_payload_len) {
      throw Error(ErrorKind::PayloadTooLarge,
                  "frame of " + std::to_string(kFrameHeaderLen + std::max<std::size_t>(f.payload.size(), f.wire_payload_len)) +
                      " bytes exceeds 65535 or captured payload exceeds wire length");
    }
    const double whole = std::floor(f.ts);
    auto sec = static_cast<std::uint32_t>(whole);
    auto usec = static_cast<std::uint32_t>(std::llround((f.ts - whole) * 1e6));
    if (usec >= 1000000) {
      ++sec;
      usec -= 1000000;
    }
    put_le32(out, sec);
    put_le32(out, usec);
    put_le32(out, static_cast<std::uint32_t>(kFrameHeaderLen + f.payload.size()));
    put_le32(out, static_cast<std::uint32_t>(wire_len));

    // Ethernet II
    static constexpr std::uint8_t kMacs[12] = {0, 0, 0, 0, 0, 2, 0, 0, 0, 0, 0, 1};
    out.insert(out.end(), std::begin(kMacs), std::end(kMacs));
    put_be16(out, 0x0800);

    // IPv4, no options, DF set
    const std::size_t ip_start = out.size();
    out.push_back(0x45);
    out.push_back(0);
    put_be16(out, static_cast<std::uint16_t>(40 + f.wire_payload_len));
    put_be16(out, 0);
    put_be16(out, 0x4000);
    out.push_back(64);
    out.push_back(6);
    put_be16(out, 0);
    put_be32(out, f.src_ip);
    put_be32(out, f.dst_ip);
    const std::uint16_t csum = ipv4_checksum(out.data() + ip_start, 20);
    out[ip_start + 10] = static_cast<std::uint8_t>(csum >> 8);
    out[ip_start + 11] = static_cast<std::uint8_t>(csum);

    // TCP, no options; checksum left zero
    put_be16(out, f.src_port);
    put_be16(out, f.dst_port);
    put_be32(out, f.seq);
    put_be32(out, 0);
    out.push_back(5 << 4);
    out.push_back(f.tcp_flags);
    put_be16(out, 65535);
    put_be16(out, 0);
    put_be16(out, 0);

    out.insert(out.end(), f.payload.begin(), f.payload.end());
  }
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoFailure, "cannot open '" + path + "'");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoFailure, "cannot create '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::IoFailure, "write failed for '" + path + "'");
}

Capture read_pcap_file(const std::string& path) { return parse_pcap(read_file_bytes(path)); }

void write_pcap_file(const std::string& path, const Capture& capture) {
  write_file_bytes(path, write_pcap(capture));
}

}  // namespace flowglyph
