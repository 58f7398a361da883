#include "vpp/raster.hpp"

#include "vpp/errors.hpp"

namespace vpp {

const char* to_string(ColorSpace s) {
  return s == ColorSpace::Pixel01 ? "pixel01" : "standardized";
}

Raster::Raster(int h, int w, int c, double fill, ColorSpace s)
    : height(h), width(w), channels(c), space(s) {
  if (h < 1 || w < 1 || c < 1) throw ContractError("raster dimensions must be positive");
  data.assign(std::size_t(h) * w * c, fill);
}

void require_space(const Raster& r, ColorSpace expected, const std::string& what) {
  if (r.space != expected) {
    throw ContractError(what + ": expected " + to_string(expected) + " raster, got " +
                        to_string(r.space));
  }
}

}  // namespace vpp
