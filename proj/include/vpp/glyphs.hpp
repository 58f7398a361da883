#pragma once

#include <string_view>
#include <vector>

namespace vpp {

// Bi-level bitmap; `bits` is row-major, 1 = ink.
struct GlyphBitmap {
  int width = 0;
  int height = 0;
  std::vector<unsigned char> bits;

  bool ink(int y, int x) const { return bits[std::size_t(y) * width + x] != 0; }
  bool operator==(const GlyphBitmap&) const = default;
};

inline constexpr int kGlyphWidth = 5;
inline constexpr int kGlyphHeight = 7;

// max(1, round(font_size / 7))
int glyph_scale(int font_size);

bool glyph_supported(char c);

// Glyphs for digits and '.', joined with one base unit of spacing and scaled by
// glyph_scale(font_size) with nearest-neighbour replication. Throws RenderError
// for empty text or unsupported characters.
GlyphBitmap rasterize_label(std::string_view text, int font_size);

// Quarter turn clockwise (text then reads top to bottom).
GlyphBitmap rotate_cw(const GlyphBitmap& g);

}  // namespace vpp
