#pragma once

#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

namespace uwsplat {

/// Three-channel linear-intensity raster, row-major, channels interleaved (r,g,b).
/// Values are nominally in [0,1] but never clamped in memory.
class RgbImage {
 public:
  RgbImage() = default;
  RgbImage(std::size_t width, std::size_t height, double fill = 0.0)
      : width_(width), height_(height), data_(width * height * 3, fill) {}
  RgbImage(std::size_t width, std::size_t height, std::vector<double> data);

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t pixel_count() const { return width_ * height_; }
  bool empty() const { return data_.empty(); }

  double& at(std::size_t x, std::size_t y, std::size_t c) { return data_[(y * width_ + x) * 3 + c]; }
  double at(std::size_t x, std::size_t y, std::size_t c) const { return data_[(y * width_ + x) * 3 + c]; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_size(const RgbImage& o) const { return width_ == o.width_ && height_ == o.height_; }

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<double> data_;
};

/// Single-channel raster for depth and alpha. Stored as f32 so that the
/// on-disk FMAP format round-trips bit-exactly.
class ScalarMap {
 public:
  ScalarMap() = default;
  ScalarMap(std::size_t width, std::size_t height, float fill = 0.0f)
      : width_(width), height_(height), data_(width * height, fill) {}
  ScalarMap(std::size_t width, std::size_t height, std::vector<float> data);

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t pixel_count() const { return width_ * height_; }
  bool empty() const { return data_.empty(); }

  float& at(std::size_t x, std::size_t y) { return data_[y * width_ + x]; }
  float at(std::size_t x, std::size_t y) const { return data_[y * width_ + x]; }

  std::vector<float>& data() { return data_; }
  const std::vector<float>& data() const { return data_; }

  bool same_size(const ScalarMap& o) const { return width_ == o.width_ && height_ == o.height_; }
  bool same_size(const RgbImage& o) const { return width_ == o.width() && height_ == o.height(); }

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<float> data_;
};

// Returned by psnr() for identical images.
inline constexpr double kPsnrInfinity = std::numeric_limits<double>::infinity();

/// 10*log10(1/MSE) over all pixels and channels, peak value 1.0.
/// Throws std::invalid_argument on a size mismatch.
double psnr(const RgbImage& a, const RgbImage& b);

/// Mean structural similarity over all fully-contained 11x11 Gaussian windows
/// (sigma 1.5, K1 0.01, K2 0.03), averaged over channels.
double ssim(const RgbImage& a, const RgbImage& b);

double mean_abs_difference(const RgbImage& a, const RgbImage& b);

struct GradientMaps {
  ScalarMap gx;
  ScalarMap gy;
};

/// Forward differences; the trailing column of gx and trailing row of gy are 0.
/// For a scalar map the differences are signed.
GradientMaps spatial_gradients(const ScalarMap& map);

/// For color images each entry is the mean over channels of the absolute
/// forward difference.
GradientMaps spatial_gradients(const RgbImage& img);

bool all_finite(const RgbImage& img);
bool all_finite(const ScalarMap& map);

}  // namespace uwsplat
