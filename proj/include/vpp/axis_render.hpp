#pragma once

#include <string>
#include <vector>

#include "vpp/raster.hpp"

namespace vpp {

enum class AxisVariant { EdgeInternal, CrossAxis, ExternalPadded };

const char* to_string(AxisVariant v);
// Accepts "edge", "cross", "external" (and the enum spellings). Throws ContractError.
AxisVariant parse_axis_variant(const std::string& s);

// Parametrization of an axis-like initialization image.
struct AxisSpec {
  AxisVariant variant = AxisVariant::EdgeInternal;
  double unit_scale = 0.1;
  int font_size = 10;
  int canvas = 336;
  int axis_thickness = 2;
  int tick_length = 6;
  int label_margin = 2;

  // Throws ContractError when an invariant fails.
  void validate() const;
  // Side of the square the tick positions span: the whole canvas, or the
  // inner content square for ExternalPadded.
  int content_side() const;
  int content_offset() const;
  int ticks_per_axis() const;
};

struct Rect {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // half-open
  bool intersects(const Rect& o) const {
    return x0 < o.x1 && o.x0 < x1 && y0 < o.y1 && o.y0 < y1;
  }
};

struct PlacedLabel {
  std::string text;
  Rect box;
  bool on_x_axis = false;
  bool on_y_axis = false;
  bool rotated = false;
  int lane = 0;
};

struct AxisLayout {
  AxisSpec spec;
  std::vector<Rect> strokes;  // axis lines and ticks
  std::vector<PlacedLabel> labels;

  int label_count_x() const;
  int label_count_y() const;
  // Smallest w such that every ink pixel lies within distance w of the border.
  int border_extent() const;
};

// Text of the label at tick i: fixed decimals of the unit, trailing zeros
// trimmed down to one decimal ("0.0", "0.05", "0.1", ...).
std::string tick_label(int i, double unit_scale);

// Places axis strokes and labels. Labels try, in order, centered on the tick,
// just after it and just before it, in up to two lanes; the first placement
// that overlaps nothing wins. Throws RenderError naming the first label that
// cannot be placed.
AxisLayout layout_axis(const AxisSpec& spec);

// White canvas with black axes, ticks and labels (Pixel01, values in {0,1}).
Raster render_axis(const AxisSpec& spec);
Raster render_layout(const AxisLayout& layout);

}  // namespace vpp
