#include "flowglyph/imaging.hpp"

#include <algorithm>
#include <cmath>

#include "flowglyph/error.hpp"

namespace flowglyph {

namespace {
constexpr char kGlyphMagic[4] = {'G', 'L', 'Y', '1'};
constexpr std::uint8_t kGlyphVersion = 1;
constexpr std::size_t kGlyphHeaderLen = 4 + 1 + 2 + 2 + 1;
}  // namespace

long round_half_up(double v) { return static_cast<long>(std::floor(v + 0.5)); }

int glyph_column(const FeatureSet& fs, std::size_t i) {
  const std::size_t n = fs.size();
  const double t0 = fs.first_ts_seq.front();
  const double span = fs.first_ts_seq.back() - t0;
  double x;
  if (span > 0.0) {
    x = (fs.first_ts_seq[i] - t0) / span * (kGlyphSide - 1);
  } else {
    x = static_cast<double>(i) * (kGlyphSide - 1) / static_cast<double>(std::max<std::size_t>(1, n - 1));
  }
  return static_cast<int>(std::clamp<long>(round_half_up(x), 0, kGlyphSide - 1));
}

int glyph_leg_height(std::uint64_t bytes) {
  if (static_cast<double>(bytes) >= kVolumeCap) return kGlyphMaxLeg;
  const double scaled = std::log1p(static_cast<double>(bytes)) / std::log1p(kVolumeCap) * kGlyphMaxLeg;
  return static_cast<int>(std::clamp<long>(round_half_up(scaled), 0, kGlyphMaxLeg));
}

Glyph render_glyph(const FeatureSet& fs) {
  if (fs.empty()) throw Error(ErrorKind::EmptyFeatureSet, "cannot render a glyph without sessions");
  Glyph g;
  auto set = [&g](int row, int col) {
    g.pixels[static_cast<std::size_t>(row * kGlyphSide + col)] = 255;
  };
  for (std::size_t i = 0; i < fs.size(); ++i) {
    const int col = glyph_column(fs, i);
    // A leg of height h covers its baseline row plus h rows beyond it.
    if (const int h = glyph_leg_height(fs.up_bytes[i]); h > 0) {
      for (int row = kGlyphUpRow - h; row <= kGlyphUpRow; ++row) set(row, col);
    }
    if (const int h = glyph_leg_height(fs.down_bytes[i]); h > 0) {
      for (int row = kGlyphDownRow; row <= kGlyphDownRow + h; ++row) set(row, col);
    }
  }
  return g;
}

std::array<double, kGlyphPixels> normalize_glyph(const Glyph& g) {
  std::array<double, kGlyphPixels> out{};
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<double>(g.pixels[i]) / 255.0;
  return out;
}

std::vector<std::uint8_t> encode_glyph(const Glyph& g) {
  if (g.label.size() > 255) {
    throw Error(ErrorKind::InvalidArgument, "glyph label longer than 255 bytes");
  }
  std::vector<std::uint8_t> out;
  out.reserve(kGlyphHeaderLen + g.label.size() + kGlyphPixels);
  out.insert(out.end(), std::begin(kGlyphMagic), std::end(kGlyphMagic));
  out.push_back(kGlyphVersion);
  out.push_back(kGlyphSide);
  out.push_back(0);
  out.push_back(kGlyphSide);
  out.push_back(0);
  out.push_back(static_cast<std::uint8_t>(g.label.size()));
  out.insert(out.end(), g.label.begin(), g.label.end());
  out.insert(out.end(), g.pixels.begin(), g.pixels.end());
  return out;
}

Glyph decode_glyph(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kGlyphHeaderLen || !std::equal(std::begin(kGlyphMagic), std::end(kGlyphMagic), bytes.begin())) {
    throw Error(ErrorKind::BadGlyphFile, "missing GLY1 magic");
  }
  if (bytes[4] != kGlyphVersion) throw Error(ErrorKind::BadGlyphFile, "unsupported glyph version");
  const int width = bytes[5] | bytes[6] << 8;
  const int height = bytes[7] | bytes[8] << 8;
  if (width != kGlyphSide || height != kGlyphSide) {
    throw Error(ErrorKind::BadGlyphFile, "glyph must be 28x28");
  }
  const std::size_t label_len = bytes[9];
  if (bytes.size() != kGlyphHeaderLen + label_len + kGlyphPixels) {
    throw Error(ErrorKind::BadGlyphFile, "glyph file has " + std::to_string(bytes.size()) + " bytes");
  }
  Glyph g;
  g.label.assign(bytes.begin() + kGlyphHeaderLen, bytes.begin() + static_cast<std::ptrdiff_t>(kGlyphHeaderLen + label_len));
  std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(kGlyphHeaderLen + label_len), bytes.end(), g.pixels.begin());
  return g;
}

void write_glyph_file(const std::string& path, const Glyph& g) { write_file_bytes(path, encode_glyph(g)); }

Glyph read_glyph_file(const std::string& path) { return decode_glyph(read_file_bytes(path)); }

}  // namespace flowglyph
