#pragma once

#include <filesystem>

#include "uwsplat/image.hpp"

namespace uwsplat {

enum class PngDepth { k8 = 8, k16 = 16 };

/// Loads an 8- or 16-bit PNG (gray, RGB, palette or with alpha; alpha dropped)
/// scaled to [0,1]. Throws DataError.
RgbImage load_image(const std::filesystem::path& path);

/// Clamps to [0,1] and quantizes to the requested bit depth.
void save_image(const RgbImage& img, const std::filesystem::path& path, PngDepth depth = PngDepth::k8);

/// Single-channel grayscale PNG of a map, values clamped to [0,1].
void save_gray_image(const ScalarMap& map, const std::filesystem::path& path);

// FMAP layout: "FMAP", u32 width, u32 height, u32 reserved (0), then
// width*height little-endian f32, row-major.
ScalarMap load_scalar_map(const std::filesystem::path& path);
void save_scalar_map(const ScalarMap& map, const std::filesystem::path& path);

}  // namespace uwsplat
