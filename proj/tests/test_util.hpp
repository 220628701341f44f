#pragma once

#include "uwsplat/verify.hpp"

namespace testutil {

using uwsplat::verify::front_camera;
using uwsplat::verify::random_cloud;
using uwsplat::verify::random_image;
using uwsplat::verify::random_map;

}  // namespace testutil
