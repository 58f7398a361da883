#include "vpp/glyphs.hpp"

#include <array>
#include <cmath>
#include <string>

#include "vpp/errors.hpp"

namespace vpp {

namespace {

using GlyphRows = std::array<const char*, kGlyphHeight>;

// 5x7 digits and period.
const GlyphRows& glyph_rows(char c) {
  static const std::array<GlyphRows, 11> table{{
      {"01110", "10001", "10011", "10101", "11001", "10001", "01110"},  // 0
      {"00100", "01100", "00100", "00100", "00100", "00100", "01110"},  // 1
      {"01110", "10001", "00001", "00010", "00100", "01000", "11111"},  // 2
      {"11111", "00010", "00100", "00010", "00001", "10001", "01110"},  // 3
      {"00010", "00110", "01010", "10010", "11111", "00010", "00010"},  // 4
      {"11111", "10000", "11110", "00001", "00001", "10001", "01110"},  // 5
      {"00110", "01000", "10000", "11110", "10001", "10001", "01110"},  // 6
      {"11111", "00001", "00010", "00100", "01000", "01000", "01000"},  // 7
      {"01110", "10001", "10001", "01110", "10001", "10001", "01110"},  // 8
      {"01110", "10001", "10001", "01111", "00001", "00010", "01100"},  // 9
      {"00000", "00000", "00000", "00000", "00000", "01100", "01100"},  // .
  }};
  return c == '.' ? table[10] : table[std::size_t(c - '0')];
}

}  // namespace

int glyph_scale(int font_size) {
  return std::max(1, int(std::lround(font_size / double(kGlyphHeight))));
}

bool glyph_supported(char c) { return (c >= '0' && c <= '9') || c == '.'; }

GlyphBitmap rasterize_label(std::string_view text, int font_size) {
  if (text.empty()) throw RenderError("cannot rasterize an empty label");
  for (char c : text) {
    if (!glyph_supported(c)) {
      throw RenderError("unsupported glyph '" + std::string(1, c) + "' in label \"" +
                        std::string(text) + "\"");
    }
  }
  const int s = glyph_scale(font_size);
  const int n = int(text.size());
  const int base_w = n * kGlyphWidth + (n - 1);
  GlyphBitmap g;
  g.width = base_w * s;
  g.height = kGlyphHeight * s;
  g.bits.assign(std::size_t(g.width) * g.height, 0);
  for (int i = 0; i < n; ++i) {
    const GlyphRows& rows = glyph_rows(text[i]);
    const int x0 = i * (kGlyphWidth + 1);
    for (int gy = 0; gy < kGlyphHeight; ++gy) {
      for (int gx = 0; gx < kGlyphWidth; ++gx) {
        if (rows[gy][gx] != '1') continue;
        for (int dy = 0; dy < s; ++dy)
          for (int dx = 0; dx < s; ++dx)
            g.bits[std::size_t(gy * s + dy) * g.width + (x0 + gx) * s + dx] = 1;
      }
    }
  }
  return g;
}

GlyphBitmap rotate_cw(const GlyphBitmap& g) {
  GlyphBitmap r;
  r.width = g.height;
  r.height = g.width;
  r.bits.assign(g.bits.size(), 0);
  for (int y = 0; y < r.height; ++y)
    for (int x = 0; x < r.width; ++x)
      r.bits[std::size_t(y) * r.width + x] = g.bits[std::size_t(g.height - 1 - x) * g.width + y];
  return r;
}

}  // namespace vpp
