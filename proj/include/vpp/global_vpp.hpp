#pragma once

#include <vector>

#include "vpp/axis_render.hpp"
#include "vpp/image_pipeline.hpp"
#include "vpp/raster.hpp"

namespace vpp {

// Square mask with ones in a border band of width `border_width`.
struct BinaryMask {
  int side = 0;
  int border_width = 0;
  std::vector<unsigned char> bits;  // side * side

  bool at(int row, int col) const { return bits[std::size_t(row) * side + col] != 0; }
  std::size_t ones() const;
};

struct OverlayConfig {
  double alpha = 0.95;
  int mask_width = 30;

  void validate() const;
};

// The learnable global prompt: a standardized raster at the encoder input size.
struct GlobalVPP {
  Raster values;
  bool trainable = true;
};

// Throws ContractError unless 0 <= w <= ceil(side/2).
BinaryMask make_mask(int side, int w);

// Prompt initialised as the preprocessed axis image.
GlobalVPP init_global_vpp(const AxisSpec& spec, const PreprocessConfig& cfg);

// alpha * x + (1 - alpha) * interpolate(prompt ⊙ mask). The mask must match
// the prompt's side; the interpolated prompt must match x.
Raster overlay(const Raster& x_processed, const GlobalVPP& vpp, const BinaryMask& mask,
               double alpha);

// The overlay mapped back to [0,1] pixels for inspection.
Raster preview_overlay(const Raster& image, const GlobalVPP& vpp, const BinaryMask& mask,
                       double alpha, const PreprocessConfig& cfg);

}  // namespace vpp
