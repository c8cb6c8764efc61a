#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flowglyph/features.hpp"

namespace flowglyph {

inline constexpr int kGlyphSide = 28;
inline constexpr int kGlyphPixels = kGlyphSide * kGlyphSide;
inline constexpr int kGlyphUpRow = 13;    // up legs grow toward row 0
inline constexpr int kGlyphDownRow = 14;  // down legs grow toward row 27
inline constexpr int kGlyphMaxLeg = 13;
inline constexpr double kVolumeCap = 1e7;

/// 28x28 grayscale raster of one party group. Row-major, 0 = background.
struct Glyph {
  std::array<std::uint8_t, kGlyphPixels> pixels{};
  std::string label;

  std::uint8_t at(int row, int col) const { return pixels[static_cast<std::size_t>(row * kGlyphSide + col)]; }

  friend bool operator==(const Glyph&, const Glyph&) = default;
};

/// floor(v + 0.5); the single rounding rule used by the glyph encoding.
long round_half_up(double v);

/// Column of session i: time-proportional across the group span, or evenly
/// spread by index when all sessions start at the same instant.
int glyph_column(const FeatureSet& fs, std::size_t i);

/// Leg height in [0, 13] for a byte volume, log-scaled against kVolumeCap.
int glyph_leg_height(std::uint64_t bytes);

/// Throws Error{EmptyFeatureSet}.
Glyph render_glyph(const FeatureSet& fs);

/// pixel / 255 for every pixel, row-major.
std::array<double, kGlyphPixels> normalize_glyph(const Glyph& g);

/// "GLY1" | version u8 | width u16le | height u16le | label_len u8 | label | 784 pixels
std::vector<std::uint8_t> encode_glyph(const Glyph& g);
Glyph decode_glyph(std::span<const std::uint8_t> bytes);
void write_glyph_file(const std::string& path, const Glyph& g);
Glyph read_glyph_file(const std::string& path);

inline constexpr int kPresentationWidth = 640;
inline constexpr int kPresentationHeight = 320;
inline constexpr int kPresentationAxisY = 160;
inline constexpr int kPresentationChartLeft = 130;
inline constexpr int kPresentationChartRight = 510;

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // width * height * 3

  std::array<std::uint8_t, 3> pixel(int x, int y) const {
    const auto i = static_cast<std::size_t>((y * width + x) * 3);
    return {rgb[i], rgb[i + 1], rgb[i + 2]};
  }
};

/// Human-facing chart of a group: labeled endpoints, one up/down column pair
/// per session. Not used as CNN input.
RgbImage render_presentation(const FeatureSet& fs);
std::vector<std::uint8_t> render_presentation_png(const FeatureSet& fs);

std::vector<std::uint8_t> encode_png(const RgbImage& image);
RgbImage decode_png(std::span<const std::uint8_t> bytes);

}  // namespace flowglyph
