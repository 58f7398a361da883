#pragma once

#include <filesystem>

#include "vpp/raster.hpp"

namespace vpp {

// 8-bit RGB. Values are clamped to [0,1] and scaled by 255 with round-half-up.
void write_png(const std::filesystem::path& path, const Raster& r);

// Returns a Pixel01 RGB raster (alpha dropped, gray expanded).
Raster read_png(const std::filesystem::path& path);

unsigned char to_byte(double v);

}  // namespace vpp
