#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace vpp {

enum class ColorSpace { Pixel01, Standardized };

const char* to_string(ColorSpace s);

// H x W x C image, row-major with interleaved channels.
struct Raster {
  int height = 0;
  int width = 0;
  int channels = 3;
  ColorSpace space = ColorSpace::Pixel01;
  std::vector<double> data;

  Raster() = default;
  Raster(int h, int w, int c = 3, double fill = 0.0, ColorSpace s = ColorSpace::Pixel01);

  std::size_t index(int y, int x, int c) const {
    return (std::size_t(y) * width + x) * channels + c;
  }
  double& at(int y, int x, int c) { return data[index(y, x, c)]; }
  double at(int y, int x, int c) const { return data[index(y, x, c)]; }

  bool same_shape(const Raster& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
  std::size_t size() const { return data.size(); }
};

// Throws ContractError when r is not tagged `expected`.
void require_space(const Raster& r, ColorSpace expected, const std::string& what);

}  // namespace vpp
