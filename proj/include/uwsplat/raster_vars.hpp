#pragma once

#include "uwsplat/autodiff.hpp"
#include "uwsplat/image.hpp"

// Conversions between rasters and graph values. Images become (H, W, 3),
// maps (H, W).
namespace uwsplat {

ad::Var to_var(const RgbImage& img);
ad::Var to_var(const ScalarMap& map);
RgbImage to_rgb_image(const ad::Var& v);
ScalarMap to_scalar_map(const ad::Var& v);

}  // namespace uwsplat
