#include "uwsplat/image.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "ssim_core.hpp"

namespace uwsplat {

RgbImage::RgbImage(std::size_t width, std::size_t height, std::vector<double> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (data_.size() != width * height * 3) {
    throw std::invalid_argument("RgbImage: buffer holds " + std::to_string(data_.size()) + " values, expected " +
                                std::to_string(width * height * 3));
  }
}

ScalarMap::ScalarMap(std::size_t width, std::size_t height, std::vector<float> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (data_.size() != width * height) {
    throw std::invalid_argument("ScalarMap: buffer holds " + std::to_string(data_.size()) + " values, expected " +
                                std::to_string(width * height));
  }
}

namespace {

void require_same_size(const RgbImage& a, const RgbImage& b, const char* what) {
  if (!a.same_size(b)) {
    throw std::invalid_argument(std::string(what) + ": image sizes differ (" + std::to_string(a.width()) + "x" +
                                std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                                std::to_string(b.height()) + ")");
  }
}

void require_gradient_size(std::size_t w, std::size_t h) {
  if (w * h < 2) {
    throw std::invalid_argument("spatial_gradients: raster must have at least two pixels");
  }
}

}  // namespace

double psnr(const RgbImage& a, const RgbImage& b) {
  require_same_size(a, b, "psnr");
  if (a.empty()) throw std::invalid_argument("psnr: empty image");
  double sse = 0.0;
  const auto& da = a.data();
  const auto& db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    const double d = da[i] - db[i];
    sse += d * d;
  }
  const double mse = sse / static_cast<double>(da.size());
  if (mse == 0.0) return kPsnrInfinity;
  return 10.0 * std::log10(1.0 / mse);
}

double ssim(const RgbImage& a, const RgbImage& b) {
  require_same_size(a, b, "ssim");
  if (a.width() < detail::kSsimWindow || a.height() < detail::kSsimWindow) {
    throw std::invalid_argument("ssim: images must be at least 11x11");
  }
  return detail::ssim_interleaved(a.data(), b.data(), a.width(), a.height(), nullptr);
}

double mean_abs_difference(const RgbImage& a, const RgbImage& b) {
  require_same_size(a, b, "mean_abs_difference");
  if (a.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) s += std::abs(a.data()[i] - b.data()[i]);
  return s / static_cast<double>(a.data().size());
}

GradientMaps spatial_gradients(const ScalarMap& map) {
  const std::size_t w = map.width();
  const std::size_t h = map.height();
  require_gradient_size(w, h);
  GradientMaps g{ScalarMap(w, h), ScalarMap(w, h)};
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      if (x + 1 < w) g.gx.at(x, y) = map.at(x + 1, y) - map.at(x, y);
      if (y + 1 < h) g.gy.at(x, y) = map.at(x, y + 1) - map.at(x, y);
    }
  }
  return g;
}

GradientMaps spatial_gradients(const RgbImage& img) {
  const std::size_t w = img.width();
  const std::size_t h = img.height();
  require_gradient_size(w, h);
  GradientMaps g{ScalarMap(w, h), ScalarMap(w, h)};
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      double sx = 0.0;
      double sy = 0.0;
      for (std::size_t c = 0; c < 3; ++c) {
        if (x + 1 < w) sx += std::abs(img.at(x + 1, y, c) - img.at(x, y, c));
        if (y + 1 < h) sy += std::abs(img.at(x, y + 1, c) - img.at(x, y, c));
      }
      g.gx.at(x, y) = static_cast<float>(sx / 3.0);
      g.gy.at(x, y) = static_cast<float>(sy / 3.0);
    }
  }
  return g;
}

bool all_finite(const RgbImage& img) {
  for (double v : img.data()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

bool all_finite(const ScalarMap& map) {
  for (float v : map.data()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace uwsplat
