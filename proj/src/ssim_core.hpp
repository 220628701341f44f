#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace uwsplat::detail {

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;

// Interleaved 3-channel planes of size width*height*3. Returns the mean SSIM
// over valid windows and channels. When grad_a is non-null it receives
// d(mean SSIM)/d(a), same layout as a.
double ssim_interleaved(std::span<const double> a, std::span<const double> b, std::size_t width,
                        std::size_t height, std::vector<double>* grad_a);

}  // namespace uwsplat::detail
