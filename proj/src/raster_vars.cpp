#include "uwsplat/raster_vars.hpp"

#include <stdexcept>

namespace uwsplat {

ad::Var to_var(const RgbImage& img) { return ad::constant(img.data(), {img.height(), img.width(), 3}); }

ad::Var to_var(const ScalarMap& map) {
  return ad::constant(std::vector<double>(map.data().begin(), map.data().end()), {map.height(), map.width()});
}

RgbImage to_rgb_image(const ad::Var& v) {
  if (v.shape().size() != 3 || v.shape()[2] != 3) throw std::invalid_argument("to_rgb_image: expected (H, W, 3)");
  return RgbImage(v.shape()[1], v.shape()[0], std::vector<double>(v.value().begin(), v.value().end()));
}

ScalarMap to_scalar_map(const ad::Var& v) {
  if (v.shape().size() != 2) throw std::invalid_argument("to_scalar_map: expected (H, W)");
  return ScalarMap(v.shape()[1], v.shape()[0], std::vector<float>(v.value().begin(), v.value().end()));
}

}  // namespace uwsplat
