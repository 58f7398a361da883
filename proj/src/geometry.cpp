#include "vpp/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "vpp/errors.hpp"

namespace vpp {

ImageDims::ImageDims(int w, int h) : width(w), height(h) {
  if (w < 1 || h < 1) {
    throw ContractError("image dims must be positive, got " + std::to_string(w) + "x" +
                        std::to_string(h));
  }
}

bool PixelBox::valid() const {
  return 0 <= x1 && x1 <= x2 && x2 <= frame.width && 0 <= y1 && y1 <= y2 &&
         y2 <= frame.height;
}

bool NormBox::valid() const {
  return 0 <= x1 && x1 <= x2 && x2 <= 1 && 0 <= y1 && y1 <= y2 && y2 <= 1;
}

PadPlacement pad_placement(const ImageDims& dims) {
  PadPlacement p;
  p.side = std::max(dims.width, dims.height);
  p.offset_x = (p.side - dims.width) / 2;
  p.offset_y = (p.side - dims.height) / 2;
  return p;
}

NormBox normalize_box(const PixelBox& b) {
  if (!b.valid()) {
    std::ostringstream os;
    os << "box [" << b.x1 << ", " << b.y1 << ", " << b.x2 << ", " << b.y2
       << "] lies outside frame " << b.frame.width << "x" << b.frame.height;
    throw ValidationError(os.str());
  }
  const PadPlacement p = pad_placement(b.frame);
  const double s = p.side;
  return {(b.x1 + p.offset_x) / s, (b.y1 + p.offset_y) / s, (b.x2 + p.offset_x) / s,
          (b.y2 + p.offset_y) / s};
}

PixelBox denormalize_box(const NormBox& n, const ImageDims& dims) {
  const PadPlacement p = pad_placement(dims);
  const double s = p.side;
  auto cx = [&](double v) { return std::clamp(v * s - p.offset_x, 0.0, double(dims.width)); };
  auto cy = [&](double v) { return std::clamp(v * s - p.offset_y, 0.0, double(dims.height)); };
  return {cx(n.x1), cy(n.y1), cx(n.x2), cy(n.y2), dims};
}

double iou(const NormBox& a, const NormBox& b) {
  const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double acc_at_iou(std::span<const std::optional<NormBox>> preds, std::span<const NormBox> gts,
                  double threshold) {
  if (preds.size() != gts.size()) {
    throw ContractError("acc_at_iou: " + std::to_string(preds.size()) + " predictions vs " +
                        std::to_string(gts.size()) + " ground truths");
  }
  if (!(threshold > 0 && threshold <= 1)) {
    throw ContractError("acc_at_iou: threshold must lie in (0,1]");
  }
  if (gts.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    if (preds[i] && iou(*preds[i], gts[i]) >= threshold) ++hits;
  }
  return double(hits) / double(gts.size());
}

NormBox quantize_box(const NormBox& b) {
  auto q = [](double v) { return double(std::lround(v * 100.0)) / 100.0; };
  return {q(b.x1), q(b.y1), q(b.x2), q(b.y2)};
}

}  // namespace vpp
