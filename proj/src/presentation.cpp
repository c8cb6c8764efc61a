#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "flowglyph/error.hpp"
#include "flowglyph/imaging.hpp"

namespace flowglyph {

namespace {

// Everything is drawn at kSuper x resolution and box-filtered down, which
// anti-aliases the fractional column edges.
constexpr int kSuper = 3;
constexpr double kMaxBarHeight = 130.0;
constexpr double kMinBarHeight = 3.0;

struct Color {
  std::uint8_t r, g, b;
};

constexpr Color kBackground{250, 250, 250};
constexpr Color kInk{40, 40, 40};
constexpr Color kAxis{120, 120, 120};
constexpr Color kUpBar{46, 110, 200};
constexpr Color kDownBar{222, 122, 40};
constexpr Color kNode{90, 90, 90};

struct GlyphRows {
  char ch;
  std::uint8_t rows[7];
};

// 5x7 bitmap font, enough for endpoint labels and captions.
constexpr GlyphRows kFont[] = {
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}}, {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}}, {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}}, {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}}, {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}}, {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
    {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}}, {':', {0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00}},
    {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}}, {' ', {0, 0, 0, 0, 0, 0, 0}},
    {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}}, {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}},
    {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}}, {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
    {'N', {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11}}, {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}}, {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}},
    {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}}, {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
};

const std::uint8_t* font_rows(char ch) {
  static constexpr std::uint8_t kBox[7] = {0x1F, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1F};
  if (ch >= 'a' && ch <= 'z') ch = static_cast<char>(ch - 'a' + 'A');
  for (const auto& g : kFont) {
    if (g.ch == ch) return g.rows;
  }
  return kBox;
}

class Canvas {
 public:
  Canvas(int width, int height) : w_(width * kSuper), h_(height * kSuper), px_(static_cast<std::size_t>(w_ * h_), kBackground) {}

  // Coordinates are in output pixels; fractional edges land on sub-pixels.
  void fill_rect(double x0, double y0, double x1, double y1, Color c) {
    const int sx0 = std::clamp(static_cast<int>(std::lround(x0 * kSuper)), 0, w_);
    const int sx1 = std::clamp(static_cast<int>(std::lround(x1 * kSuper)), 0, w_);
    const int sy0 = std::clamp(static_cast<int>(std::lround(y0 * kSuper)), 0, h_);
    const int sy1 = std::clamp(static_cast<int>(std::lround(y1 * kSuper)), 0, h_);
    for (int y = sy0; y < sy1; ++y) {
      for (int x = sx0; x < sx1; ++x) px_[static_cast<std::size_t>(y * w_ + x)] = c;
    }
  }

  void fill_circle(double cx, double cy, double radius, Color c) {
    const double r = radius * kSuper;
    const double scx = cx * kSuper;
    const double scy = cy * kSuper;
    for (int y = std::max(0, static_cast<int>(scy - r)); y < std::min(h_, static_cast<int>(scy + r) + 1); ++y) {
      for (int x = std::max(0, static_cast<int>(scx - r)); x < std::min(w_, static_cast<int>(scx + r) + 1); ++x) {
        const double dx = x + 0.5 - scx;
        const double dy = y + 0.5 - scy;
        if (dx * dx + dy * dy <= r * r) px_[static_cast<std::size_t>(y * w_ + x)] = c;
      }
    }
  }

  void text_centered(const std::string& s, double cx, double top, Color c) {
    constexpr double kAdvance = 6.0;
    double x = cx - kAdvance * static_cast<double>(s.size()) / 2.0;
    for (char ch : s) {
      const std::uint8_t* rows = font_rows(ch);
      for (int row = 0; row < 7; ++row) {
        for (int col = 0; col < 5; ++col) {
          if (rows[row] & (0x10 >> col)) fill_rect(x + col, top + row, x + col + 1, top + row + 1, c);
        }
      }
      x += kAdvance;
    }
  }

  RgbImage downsample() const {
    RgbImage out;
    out.width = w_ / kSuper;
    out.height = h_ / kSuper;
    out.rgb.resize(static_cast<std::size_t>(out.width * out.height * 3));
    for (int y = 0; y < out.height; ++y) {
      for (int x = 0; x < out.width; ++x) {
        int r = 0, g = 0, b = 0;
        for (int dy = 0; dy < kSuper; ++dy) {
          for (int dx = 0; dx < kSuper; ++dx) {
            const Color& c = px_[static_cast<std::size_t>((y * kSuper + dy) * w_ + x * kSuper + dx)];
            r += c.r;
            g += c.g;
            b += c.b;
          }
        }
        constexpr int kArea = kSuper * kSuper;
        const auto i = static_cast<std::size_t>((y * out.width + x) * 3);
        out.rgb[i] = static_cast<std::uint8_t>((r + kArea / 2) / kArea);
        out.rgb[i + 1] = static_cast<std::uint8_t>((g + kArea / 2) / kArea);
        out.rgb[i + 2] = static_cast<std::uint8_t>((b + kArea / 2) / kArea);
      }
    }
    return out;
  }

 private:
  int w_;
  int h_;
  std::vector<Color> px_;
};

double bar_height(std::uint64_t bytes) {
  const double h = std::log1p(static_cast<double>(bytes)) / std::log1p(kVolumeCap) * kMaxBarHeight;
  return std::clamp(h, kMinBarHeight, kMaxBarHeight);
}

void png_write_to_vector(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void png_flush_noop(png_structp) {}

struct PngSource {
  std::span<const std::uint8_t> bytes;
  std::size_t offset = 0;
};

void png_read_from_span(png_structp png, png_bytep data, png_size_t length) {
  auto* src = static_cast<PngSource*>(png_get_io_ptr(png));
  if (src->bytes.size() - src->offset < length) png_error(png, "truncated PNG");
  std::memcpy(data, src->bytes.data() + src->offset, length);
  src->offset += length;
}

}  // namespace

RgbImage render_presentation(const FeatureSet& fs) {
  if (fs.empty()) throw Error(ErrorKind::EmptyFeatureSet, "cannot render a chart without sessions");
  Canvas canvas(kPresentationWidth, kPresentationHeight);

  constexpr double kClientX = 60.0;
  constexpr double kServerX = 580.0;
  constexpr double kAxisY = kPresentationAxisY;
  canvas.fill_rect(kClientX, kAxisY - 0.5, kServerX, kAxisY + 0.5, kAxis);
  canvas.fill_circle(kClientX, kAxisY, 26.0, kNode);
  canvas.fill_circle(kServerX, kAxisY, 26.0, kNode);
  canvas.text_centered("CLIENT", kClientX, kAxisY + 36.0, kInk);
  canvas.text_centered(format_ipv4(fs.group_ref.client_ip), kClientX, kAxisY + 48.0, kInk);
  canvas.text_centered("SERVER", kServerX, kAxisY + 36.0, kInk);
  canvas.text_centered(format_ipv4(fs.group_ref.server_ip) + ":" + std::to_string(fs.group_ref.server_port),
                       kServerX, kAxisY + 48.0, kInk);
  canvas.text_centered(std::to_string(fs.size()) + " SESSIONS", kPresentationWidth / 2.0, 12.0, kInk);

  const std::size_t n = fs.size();
  const double t0 = fs.first_ts_seq.front();
  const double span = fs.first_ts_seq.back() - t0;
  const double chart = kPresentationChartRight - kPresentationChartLeft;
  const double width = std::clamp(chart / (2.0 * static_cast<double>(n)), 2.0, 14.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double frac = span > 0.0 ? (fs.first_ts_seq[i] - t0) / span
                                   : static_cast<double>(i) / static_cast<double>(std::max<std::size_t>(1, n - 1));
    const double cx = kPresentationChartLeft + frac * chart;
    const double up = bar_height(fs.up_bytes[i]);
    const double down = bar_height(fs.down_bytes[i]);
    canvas.fill_rect(cx - width / 2, kAxisY - up, cx + width / 2, kAxisY - 0.5, kUpBar);
    canvas.fill_rect(cx - width / 2, kAxisY + 0.5, cx + width / 2, kAxisY + down, kDownBar);
  }
  return canvas.downsample();
}

std::vector<std::uint8_t> render_presentation_png(const FeatureSet& fs) {
  return encode_png(render_presentation(fs));
}

std::vector<std::uint8_t> encode_png(const RgbImage& image) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorKind::IoFailure, "libpng initialisation failed");
  }
  std::vector<std::uint8_t> out;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorKind::IoFailure, "PNG encoding failed");
  }
  png_set_write_fn(png, &out, png_write_to_vector, png_flush_noop);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < image.height; ++y) {
    png_write_row(png, const_cast<png_bytep>(image.rgb.data() + static_cast<std::size_t>(y * image.width * 3)));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

RgbImage decode_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    throw Error(ErrorKind::BadGlyphFile, "not a PNG stream");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorKind::IoFailure, "libpng initialisation failed");
  }
  PngSource src{bytes, 0};
  RgbImage image;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorKind::BadGlyphFile, "PNG decoding failed");
  }
  png_set_read_fn(png, &src, png_read_from_span);
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_palette_to_rgb(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  image.width = static_cast<int>(png_get_image_width(png, info));
  image.height = static_cast<int>(png_get_image_height(png, info));
  image.rgb.resize(static_cast<std::size_t>(image.width * image.height * 3));
  for (int y = 0; y < image.height; ++y) {
    png_read_row(png, image.rgb.data() + static_cast<std::size_t>(y * image.width * 3), nullptr);
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

}  // namespace flowglyph
