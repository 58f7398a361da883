#pragma once

#include <optional>
#include <span>

namespace vpp {

struct ImageDims {
  int width = 1;
  int height = 1;

  // Throws ContractError unless both sides are >= 1.
  ImageDims(int w, int h);
  ImageDims() = default;

  bool operator==(const ImageDims&) const = default;
};

// Box in absolute source-image pixels.
struct PixelBox {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
  ImageDims frame;

  bool valid() const;
};

// Box in fractions of the padded square side.
struct NormBox {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  bool valid() const;
  double area() const { return (x2 - x1) * (y2 - y1); }
  bool operator==(const NormBox&) const = default;
};

// Where an image lands when centered in a max(w,h) square.
struct PadPlacement {
  int side = 0;
  int offset_x = 0;
  int offset_y = 0;
};

PadPlacement pad_placement(const ImageDims& dims);

// Pixel box -> padded-square fractions. Throws ValidationError for boxes
// outside their frame.
NormBox normalize_box(const PixelBox& b);

// Inverse of normalize_box, clamped to the frame.
PixelBox denormalize_box(const NormBox& n, const ImageDims& dims);

// Intersection over union; 0 when the union has zero area.
double iou(const NormBox& a, const NormBox& b);

// Fraction of pairs whose prediction exists and reaches the threshold (>=).
// Throws ContractError on length mismatch or threshold outside (0,1].
double acc_at_iou(std::span<const std::optional<NormBox>> preds,
                  std::span<const NormBox> gts, double threshold = 0.5);

// Rounds each coordinate to the two-decimal grid used in serialized samples.
NormBox quantize_box(const NormBox& b);

}  // namespace vpp
