#include "vpp/global_vpp.hpp"

#include <algorithm>
#include <string>

#include "vpp/errors.hpp"
#include "vpp/kernels.hpp"

namespace vpp {

std::size_t BinaryMask::ones() const { return std::size_t(std::count(bits.begin(), bits.end(), 1)); }

void OverlayConfig::validate() const {
  if (!(alpha >= 0 && alpha <= 1)) throw ContractError("alpha must lie in [0,1]");
  if (mask_width < 0) throw ContractError("mask_width must be >= 0");
}

BinaryMask make_mask(int side, int w) {
  if (side < 1) throw ContractError("mask side must be >= 1");
  if (w < 0 || w > (side + 1) / 2) {
    throw ContractError("mask width " + std::to_string(w) + " outside [0, " +
                        std::to_string((side + 1) / 2) + "] for side " + std::to_string(side));
  }
  BinaryMask m;
  m.side = side;
  m.border_width = w;
  m.bits.assign(std::size_t(side) * side, 0);
  for (int r = 0; r < side; ++r)
    for (int c = 0; c < side; ++c)
      m.bits[std::size_t(r) * side + c] =
          std::min({r, c, side - 1 - r, side - 1 - c}) < w ? 1 : 0;
  return m;
}

GlobalVPP init_global_vpp(const AxisSpec& spec, const PreprocessConfig& cfg) {
  GlobalVPP g;
  g.values = preprocess(render_axis(spec), cfg);
  g.trainable = true;
  return g;
}

Raster overlay(const Raster& x_processed, const GlobalVPP& vpp, const BinaryMask& mask,
               double alpha) {
  require_space(x_processed, ColorSpace::Standardized, "overlay input");
  if (!(alpha >= 0 && alpha <= 1)) throw ContractError("alpha must lie in [0,1]");
  const Raster& prompt = vpp.values;
  if (prompt.height != mask.side || prompt.width != mask.side) {
    throw ContractError("mask side " + std::to_string(mask.side) + " does not match prompt " +
                        std::to_string(prompt.height) + "x" + std::to_string(prompt.width));
  }
  if (x_processed.height != x_processed.width || x_processed.channels != prompt.channels) {
    throw ContractError("overlay input must be square with the prompt's channel count");
  }
  Raster out(x_processed.height, x_processed.width, x_processed.channels, 0.0,
             ColorSpace::Standardized);
  if (prompt.height == x_processed.height) {
    kernels::overlay_blend(x_processed.data.data(), prompt.data.data(), mask.bits.data(),
                           std::size_t(mask.side) * mask.side, prompt.channels, alpha,
                           out.data.data());
    return out;
  }
  // Mask first, then rescale the masked prompt to the input size.
  Raster masked = prompt;
  for (std::size_t p = 0; p < mask.bits.size(); ++p)
    if (!mask.bits[p])
      for (int c = 0; c < masked.channels; ++c) masked.data[p * masked.channels + c] = 0.0;
  const Raster scaled = interpolate_to(masked, x_processed.height);
  const std::vector<unsigned char> ones(std::size_t(scaled.height) * scaled.width, 1);
  kernels::overlay_blend(x_processed.data.data(), scaled.data.data(), ones.data(), ones.size(),
                         scaled.channels, alpha, out.data.data());
  return out;
}

Raster preview_overlay(const Raster& image, const GlobalVPP& vpp, const BinaryMask& mask,
                       double alpha, const PreprocessConfig& cfg) {
  const Raster x = preprocess(image, cfg);
  Raster out = destandardize(overlay(x, vpp, mask, alpha), cfg);
  for (double& v : out.data) v = std::clamp(v, 0.0, 1.0);
  return out;
}

}  // namespace vpp
