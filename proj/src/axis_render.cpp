#include "vpp/axis_render.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "vpp/errors.hpp"
#include "vpp/glyphs.hpp"

namespace vpp {

namespace {

constexpr int kMaxLanes = 2;

enum class Placement { Center, After, Before };

struct Frame {
  int origin = 0;  // pixel where normalized 0 lands
  int span = 0;    // pixels covered by [0,1]
  int axis_line = 0;
  bool shared_origin = false;
  // Lane 0 starts at this depth; further lanes step by `lane_step` (negative
  // for ExternalPadded, whose labels grow toward the border).
  int lane0 = 0;
  int lane_step = 0;
  int lower_clamp = 0;
};

int tick_pixel(const Frame& f, double v) {
  return std::min(f.origin + int(std::lround(v * f.span)), f.origin + f.span - 1);
}

Frame frame_for(const AxisSpec& s, int glyph_h) {
  const int t = s.axis_thickness;
  Frame f;
  f.origin = s.content_offset();
  f.span = s.content_side();
  switch (s.variant) {
    case AxisVariant::EdgeInternal:
      f.axis_line = 0;
      f.shared_origin = true;
      f.lane0 = t + s.tick_length + s.label_margin;
      f.lane_step = glyph_h + s.label_margin;
      f.lower_clamp = t;
      break;
    case AxisVariant::CrossAxis:
      f.axis_line = s.canvas / 2 - t / 2;
      f.shared_origin = false;
      f.lane0 = f.axis_line + t + s.tick_length + s.label_margin;
      f.lane_step = glyph_h + s.label_margin;
      f.lower_clamp = 0;
      break;
    case AxisVariant::ExternalPadded:
      f.axis_line = f.origin - t;
      f.shared_origin = true;
      f.lane0 = f.origin - t - s.tick_length - s.label_margin - glyph_h;
      f.lane_step = -(glyph_h + s.label_margin);
      f.lower_clamp = f.origin;
      break;
  }
  return f;
}

// Rect for an axis-parallel extent [a, a+len) at perpendicular depth [d, d+thick).
Rect oriented(bool x_axis, int a, int len, int d, int thick) {
  return x_axis ? Rect{a, d, a + len, d + thick} : Rect{d, a, d + thick, a + len};
}

}  // namespace

const char* to_string(AxisVariant v) {
  switch (v) {
    case AxisVariant::EdgeInternal: return "edge";
    case AxisVariant::CrossAxis: return "cross";
    case AxisVariant::ExternalPadded: return "external";
  }
  return "?";
}

AxisVariant parse_axis_variant(const std::string& s) {
  if (s == "edge" || s == "EdgeInternal" || s == "internal") return AxisVariant::EdgeInternal;
  if (s == "cross" || s == "CrossAxis") return AxisVariant::CrossAxis;
  if (s == "external" || s == "ExternalPadded") return AxisVariant::ExternalPadded;
  throw ContractError("unknown axis variant '" + s + "' (expected edge, cross or external)");
}

void AxisSpec::validate() const {
  if (!(unit_scale > 0 && unit_scale <= 0.5)) {
    throw ContractError("unit_scale must lie in (0, 0.5]");
  }
  const double inv = 1.0 / unit_scale;
  if (std::abs(inv - std::round(inv)) > 1e-9) {
    throw ContractError("1/unit_scale must be integral");
  }
  if (font_size < 5) throw ContractError("font_size must be >= 5");
  if (canvas < 64) throw ContractError("canvas must be >= 64");
  if (axis_thickness < 1 || tick_length < 0 || label_margin < 0) {
    throw ContractError("stroke geometry must be non-negative (thickness >= 1)");
  }
  if (content_side() > canvas || content_side() < 1) {
    throw ContractError("content side exceeds canvas");
  }
}

int AxisSpec::content_side() const {
  if (variant == AxisVariant::ExternalPadded) {
    return int(std::lround(canvas * 276.0 / 336.0));
  }
  return canvas;
}

int AxisSpec::content_offset() const { return (canvas - content_side()) / 2; }

int AxisSpec::ticks_per_axis() const { return 1 + int(std::lround(1.0 / unit_scale)); }

std::string tick_label(int i, double unit_scale) {
  const double ten_units = unit_scale * 10.0;
  const int decimals = std::abs(ten_units - std::round(ten_units)) < 1e-9 ? 1 : 2;
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(decimals);
  os << i * unit_scale;
  std::string s = os.str();
  while (s.size() > 3 && s.back() == '0' && s[s.size() - 2] != '.') s.pop_back();
  return s;
}

int AxisLayout::label_count_x() const {
  return int(std::count_if(labels.begin(), labels.end(),
                           [](const PlacedLabel& l) { return l.on_x_axis; }));
}

int AxisLayout::label_count_y() const {
  return int(std::count_if(labels.begin(), labels.end(),
                           [](const PlacedLabel& l) { return l.on_y_axis; }));
}

int AxisLayout::border_extent() const {
  const int c = spec.canvas;
  int w = 0;
  auto grow = [&](const Rect& r) {
    for (int y = r.y0; y < r.y1; ++y)
      for (int x = r.x0; x < r.x1; ++x)
        w = std::max(w, 1 + std::min({x, y, c - 1 - x, c - 1 - y}));
  };
  for (const Rect& r : strokes) grow(r);
  for (const PlacedLabel& l : labels) grow(l.box);
  return w;
}

AxisLayout layout_axis(const AxisSpec& spec) {
  spec.validate();
  AxisLayout layout;
  layout.spec = spec;
  const int t = spec.axis_thickness;
  const int c = spec.canvas;
  const int glyph_h = kGlyphHeight * glyph_scale(spec.font_size);
  const Frame f = frame_for(spec, glyph_h);
  const int n_ticks = spec.ticks_per_axis();

  // Axis lines over the content span, then ticks on the label side.
  for (bool x_axis : {true, false}) {
    const int line_a = spec.variant == AxisVariant::EdgeInternal ? 0 : f.origin;
    const int line_len = spec.variant == AxisVariant::EdgeInternal ? c : f.span;
    const int a0 = spec.variant == AxisVariant::CrossAxis ? 0 : line_a;
    const int len = spec.variant == AxisVariant::CrossAxis ? c : line_len;
    layout.strokes.push_back(oriented(x_axis, a0, len, f.axis_line, t));
    const int tick_depth = spec.variant == AxisVariant::ExternalPadded
                               ? f.axis_line - spec.tick_length
                               : f.axis_line + t;
    for (int i = 0; i < n_ticks; ++i) {
      const int p = tick_pixel(f, i * spec.unit_scale);
      const int a = std::clamp(p - t / 2, f.origin, f.origin + f.span - t);
      layout.strokes.push_back(oriented(x_axis, a, t, tick_depth, spec.tick_length));
    }
  }

  auto collides = [&](const Rect& r) {
    if (r.x0 < 0 || r.y0 < 0 || r.x1 > c || r.y1 > c) return true;
    for (const Rect& s : layout.strokes)
      if (r.intersects(s)) return true;
    for (const PlacedLabel& l : layout.labels)
      if (r.intersects(l.box)) return true;
    return false;
  };

  for (bool x_axis : {true, false}) {
    for (int i = 0; i < n_ticks; ++i) {
      if (!x_axis && i == 0 && f.shared_origin) continue;
      const std::string text = tick_label(i, spec.unit_scale);
      GlyphBitmap g = rasterize_label(text, spec.font_size);
      const int len = g.width;
      const int p = tick_pixel(f, i * spec.unit_scale);
      bool placed = false;
      for (int lane = 0; lane < kMaxLanes && !placed; ++lane) {
        const int depth = f.lane0 + lane * f.lane_step;
        for (Placement mode : {Placement::Center, Placement::After, Placement::Before}) {
          int a = 0;
          switch (mode) {
            case Placement::Center: a = p - len / 2; break;
            case Placement::After: a = p + t / 2 + 1; break;
            case Placement::Before: a = p - t / 2 - 1 - len; break;
          }
          a = std::max(f.lower_clamp, std::min(a, c - len));
          const Rect r = oriented(x_axis, a, len, depth, glyph_h);
          if (collides(r)) continue;
          PlacedLabel l;
          l.text = text;
          l.box = r;
          l.on_x_axis = x_axis;
          l.on_y_axis = !x_axis || (i == 0 && f.shared_origin);
          l.rotated = !x_axis;
          l.lane = lane;
          layout.labels.push_back(std::move(l));
          placed = true;
          break;
        }
      }
      if (!placed) {
        std::ostringstream os;
        os << "label \"" << text << "\" on the " << (x_axis ? "x" : "y")
           << " axis collides with existing marks (variant " << to_string(spec.variant)
           << ", unit " << spec.unit_scale << ", font " << spec.font_size << ")";
        throw RenderError(os.str());
      }
    }
  }
  return layout;
}

Raster render_layout(const AxisLayout& layout) {
  const int c = layout.spec.canvas;
  Raster r(c, c, 3, 1.0);
  auto ink = [&](int y, int x) {
    for (int ch = 0; ch < 3; ++ch) r.at(y, x, ch) = 0.0;
  };
  for (const Rect& s : layout.strokes)
    for (int y = s.y0; y < s.y1; ++y)
      for (int x = s.x0; x < s.x1; ++x) ink(y, x);
  for (const PlacedLabel& l : layout.labels) {
    GlyphBitmap g = rasterize_label(l.text, layout.spec.font_size);
    if (l.rotated) g = rotate_cw(g);
    for (int y = 0; y < g.height; ++y)
      for (int x = 0; x < g.width; ++x)
        if (g.ink(y, x)) ink(l.box.y0 + y, l.box.x0 + x);
  }
  return r;
}

Raster render_axis(const AxisSpec& spec) { return render_layout(layout_axis(spec)); }

}  // namespace vpp
