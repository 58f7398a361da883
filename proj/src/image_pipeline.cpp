#include "vpp/image_pipeline.hpp"

#include "vpp/errors.hpp"
#include "vpp/geometry.hpp"
#include "vpp/kernels.hpp"

namespace vpp {

void PreprocessConfig::validate() const {
  if (target_side < 16) throw ContractError("target_side must be >= 16");
  for (double s : channel_std) {
    if (!(s > 0)) throw ContractError("channel_std entries must be > 0");
  }
}

PreprocessConfig PreprocessConfig::identity(int side) {
  PreprocessConfig c;
  c.target_side = side;
  c.channel_mean = {0, 0, 0};
  c.channel_std = {1, 1, 1};
  return c;
}

Raster resize_bilinear(const Raster& r, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) throw ContractError("resize target must be >= 1");
  Raster out(out_h, out_w, r.channels, 0.0, r.space);
  if (out_h == r.height && out_w == r.width) {
    out.data = r.data;
    return out;
  }
  kernels::resize_bilinear(r.data.data(), r.height, r.width, r.channels, out.data.data(), out_h,
                           out_w);
  return out;
}

Raster pad_longer_side(const Raster& r, const std::array<double, 3>& fill) {
  require_space(r, ColorSpace::Pixel01, "pad_longer_side");
  const PadPlacement p = pad_placement(ImageDims(r.width, r.height));
  if (p.side == r.width && p.side == r.height) return r;
  Raster out(p.side, p.side, r.channels, 0.0, r.space);
  for (int y = 0; y < p.side; ++y)
    for (int x = 0; x < p.side; ++x)
      for (int c = 0; c < r.channels; ++c) out.at(y, x, c) = fill[c % 3];
  for (int y = 0; y < r.height; ++y)
    for (int x = 0; x < r.width; ++x)
      for (int c = 0; c < r.channels; ++c)
        out.at(y + p.offset_y, x + p.offset_x, c) = r.at(y, x, c);
  return out;
}

Raster standardize(const Raster& r, const PreprocessConfig& cfg) {
  require_space(r, ColorSpace::Pixel01, "standardize");
  cfg.validate();
  if (r.channels != 3) throw ContractError("standardize expects 3 channels");
  Raster out = r;
  kernels::standardize(out.data.data(), std::size_t(r.height) * r.width, 3,
                       cfg.channel_mean.data(), cfg.channel_std.data());
  out.space = ColorSpace::Standardized;
  return out;
}

Raster destandardize(const Raster& r, const PreprocessConfig& cfg) {
  require_space(r, ColorSpace::Standardized, "destandardize");
  cfg.validate();
  if (r.channels != 3) throw ContractError("destandardize expects 3 channels");
  Raster out = r;
  kernels::destandardize(out.data.data(), std::size_t(r.height) * r.width, 3,
                         cfg.channel_mean.data(), cfg.channel_std.data());
  out.space = ColorSpace::Pixel01;
  return out;
}

Raster preprocess(const Raster& r, const PreprocessConfig& cfg) {
  require_space(r, ColorSpace::Pixel01, "preprocess");
  cfg.validate();
  std::array<double, 3> fill{};
  switch (cfg.pad_fill) {
    case PadFill::Mean: fill = cfg.channel_mean; break;
    case PadFill::White: fill = {1, 1, 1}; break;
    case PadFill::Black: fill = {0, 0, 0}; break;
  }
  const Raster padded = pad_longer_side(r, fill);
  const Raster sized = resize_bilinear(padded, cfg.target_side, cfg.target_side);
  return standardize(sized, cfg);
}

Raster interpolate_to(const Raster& r, int out_side) {
  if (r.height != r.width) {
    throw ContractError("interpolate_to expects a square raster, got " +
                        std::to_string(r.height) + "x" + std::to_string(r.width));
  }
  return resize_bilinear(r, out_side, out_side);
}

}  // namespace vpp
