#pragma once

#include <array>

#include "vpp/raster.hpp"

namespace vpp {

enum class PadFill { Mean, White, Black };

// Parameters of the encoder preprocessing transform (pad, resize, standardize).
struct PreprocessConfig {
  int target_side = 336;
  // Published constants of the CLIP encoder family.
  std::array<double, 3> channel_mean{0.48145466, 0.4578275, 0.40821073};
  std::array<double, 3> channel_std{0.26862954, 0.26130258, 0.27577711};
  PadFill pad_fill = PadFill::Mean;

  // Throws ContractError for non-positive std or target_side < 16.
  void validate() const;

  static PreprocessConfig identity(int side);
};

Raster resize_bilinear(const Raster& r, int out_h, int out_w);

// Centers r in a max(H,W) square; the pad band takes `fill` per channel.
Raster pad_longer_side(const Raster& r, const std::array<double, 3>& fill);

Raster standardize(const Raster& r, const PreprocessConfig& cfg);
Raster destandardize(const Raster& r, const PreprocessConfig& cfg);

// pad_longer_side -> resize_bilinear(target_side) -> standardize.
Raster preprocess(const Raster& r, const PreprocessConfig& cfg);

// Square-to-square resize; identity when the side already matches.
Raster interpolate_to(const Raster& r, int out_side);

}  // namespace vpp
