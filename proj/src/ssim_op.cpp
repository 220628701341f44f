#include <stdexcept>

#include "ssim_core.hpp"
#include "uwsplat/losses.hpp"

namespace uwsplat {

ad::Var ssim_against(const ad::Var& rendered, const RgbImage& target) {
  const auto& s = rendered.shape();
  if (s.size() != 3 || s[2] != 3 || s[0] != target.height() || s[1] != target.width())
    throw std::invalid_argument("ssim_against: image sizes differ");
  if (target.width() < detail::kSsimWindow || target.height() < detail::kSsimWindow)
    throw std::invalid_argument("ssim_against: images must be at least 11x11");
  auto grad = std::make_shared<std::vector<double>>();
  const double v = detail::ssim_interleaved(rendered.value(), target.data(), target.width(), target.height(),
                                            rendered.requires_grad() ? grad.get() : nullptr);
  return ad::make_op({v}, {1}, {rendered}, [grad](ad::Node& self) {
    auto& g = self.parent_grad(0);
    const double up = self.grad[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += up * (*grad)[i];
  });
}

}  // namespace uwsplat
