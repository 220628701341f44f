#include <cmath>
#include <random>

#include "doctest.h"
#include "test_util.hpp"
#include "uwsplat/losses.hpp"
#include "uwsplat/raster_vars.hpp"
#include "uwsplat/render.hpp"

using namespace uwsplat;

namespace {

RgbImage pixel(double r, double g, double b) {
  RgbImage img(1, 1);
  img.at(0, 0, 0) = r;
  img.at(0, 0, 1) = g;
  img.at(0, 0, 2) = b;
  return img;
}

}  // namespace

TEST_CASE("gs loss") {
  std::mt19937_64 rng(1);
  const RgbImage t = testutil::random_image(rng, 12, 12, 0.1, 0.8);
  CHECK(loss_gs(to_var(t), t, 0.2).item() == doctest::Approx(0.0).epsilon(1e-15));

  RgbImage shifted = t;
  for (double& v : shifted.data()) v += 0.1;
  CHECK(loss_gs(to_var(shifted), t, 0.0).item() == doctest::Approx(0.1));
  const double want = 0.8 * 0.1 + 0.2 * (1.0 - ssim(shifted, t)) / 2.0;
  CHECK(loss_gs(to_var(shifted), t, 0.2).item() == doctest::Approx(want).epsilon(1e-12));

  // two constant images: the SSIM term is the luminance factor alone
  const double c1 = 1e-4;
  const double lum = (2 * 0.5 * 0.6 + c1) / (0.25 + 0.36 + c1);
  CHECK(loss_gs(to_var(RgbImage(11, 11, 0.6)), RgbImage(11, 11, 0.5), 0.2).item() ==
        doctest::Approx(0.8 * 0.1 + 0.2 * (1.0 - lum) / 2.0).epsilon(1e-12));
  CHECK_THROWS_AS(loss_gs(to_var(t), RgbImage(12, 11), 0.2), std::invalid_argument);
}

TEST_CASE("backscatter loss") {
  // D = I - B = (0.2, -0.1, 0)
  const RgbImage i = pixel(0.5, 0.3, 0.4);
  const ad::Var b = to_var(pixel(0.3, 0.4, 0.4));
  CHECK(loss_backscatter(i, b, 5.0).item() == doctest::Approx(0.7));
  CHECK(loss_backscatter(i, b, 5.0, true).item() == doctest::Approx(0.2 - 0.5));
  CHECK(loss_backscatter(i, to_var(i), 5.0).item() == 0.0);
  CHECK(loss_backscatter(i, to_var(RgbImage(1, 1)), 5.0).item() == doctest::Approx(1.2));
}

TEST_CASE("gray world and saturation") {
  CHECK(loss_grayworld(to_var(RgbImage(3, 2, 0.5))).item() == 0.0);
  CHECK(loss_grayworld(to_var(RgbImage(3, 2, 0.6))).item() == doctest::Approx(0.01));
  RgbImage m(1, 2);
  const double means[3] = {0.5, 0.4, 0.6};
  for (int c = 0; c < 3; ++c) {
    m.at(0, 0, c) = means[c] - 0.1;
    m.at(0, 1, c) = means[c] + 0.1;
  }
  CHECK(loss_grayworld(to_var(m)).item() == doctest::Approx(0.02 / 3.0));

  CHECK(loss_saturation(to_var(RgbImage(4, 4, 0.7)), 0.7).item() == 0.0);
  CHECK(loss_saturation(to_var(pixel(0.8, 0.8, 0.8)), 0.7).item() == doctest::Approx(0.3));
  CHECK(loss_saturation(to_var(RgbImage(2, 2, 1.0)), 1.0).item() == 0.0);
}

TEST_CASE("depth weighted reconstruction") {
  const RgbImage i(5, 4, 0.5);
  CHECK(loss_depth_weighted_recon(i, to_var(i), to_var(ScalarMap(5, 4, 2.0f))).item() == 0.0);
  CHECK(loss_depth_weighted_recon(i, to_var(RgbImage(5, 4, 0.4)), to_var(ScalarMap(5, 4, 0.0f))).item() == 0.0);
  CHECK(loss_depth_weighted_recon(i, to_var(RgbImage(5, 4, 0.4)), to_var(ScalarMap(5, 4, 2.0f))).item() ==
        doctest::Approx(0.6 * 20));

  ad::Var z = ad::parameter(std::vector<double>(20, 2.0), {4, 5});
  ad::Var ih = ad::parameter(std::vector<double>(60, 0.4), {4, 5, 3});
  ad::backward(loss_depth_weighted_recon(i, ih, z));
  for (double g : z.grad()) CHECK(g == 0.0);
  for (double g : ih.grad()) CHECK(g == -2.0);
}

TEST_CASE("depth smoothness") {
  CHECK(loss_depth_smooth(RgbImage(3, 3, 0.2), to_var(ScalarMap(3, 3, 1.5f))).item() == 0.0);
  ScalarMap z(1, 2);
  z.at(0, 1) = 1.0f;
  CHECK(loss_depth_smooth(RgbImage(1, 2, 0.3), to_var(z)).item() == doctest::Approx(1.0));

  // a stronger image edge at the step damps the penalty
  ScalarMap step(2, 1);
  step.at(1, 0) = 1.0f;
  double prev = 2.0;
  for (double edge : {0.0, 0.2, 0.5, 1.0}) {
    RgbImage img(2, 1);
    for (int c = 0; c < 3; ++c) img.at(1, 0, c) = edge;
    const double v = loss_depth_smooth(img, to_var(step)).item();
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("opacity background") {
  const Rgb binf{0.07, 0.2, 0.39};
  const RgbImage far = pixel(0.9, 0.9, 0.9);
  CHECK(loss_opacity_background(far, to_var(ScalarMap(1, 1, 0.9f)), binf, 0.02).item() == 0.0);
  const RgbImage water = pixel(0.07, 0.2, 0.39);
  CHECK(loss_opacity_background(water, to_var(ScalarMap(1, 1, 0.9f)), binf, 0.02).item() ==
        doctest::Approx(0.9).epsilon(1e-7));
  CHECK(loss_opacity_background(water, to_var(ScalarMap(1, 1, 0.9f)), binf, 0.0).item() == 0.0);
}

TEST_CASE("total loss weighting") {
  std::mt19937_64 rng(2);
  const RgbImage i = testutil::random_image(rng, 12, 12, 0.05, 0.6);
  LossInputs in;
  in.captured = &i;
  in.true_color = to_var(testutil::random_image(rng, 12, 12, 0.0, 0.9));
  in.depth = to_var(testutil::random_map(rng, 12, 12, 0.5, 3.0));
  in.alpha = to_var(testutil::random_map(rng, 12, 12, 0.0, 1.0));
  in.medium = MediumVars::constants(MediumParams::preset(MediumPreset::kWater));

  LossConfig cfg;
  const LossResult all = total_loss(in, cfg);
  const LossBreakdown& p = all.parts;
  CHECK(all.total.item() == doctest::Approx(p.gs + p.backscatter + p.grayworld + p.saturation + p.opacity +
                                            p.depth_smooth + p.depth_recon));

  cfg.weights = {0, 0, 0, 0, 0, 0, 0};
  CHECK(total_loss(in, cfg).total.item() == 0.0);
  cfg.weights.grayworld = 1.0;
  CHECK(total_loss(in, cfg).total.item() == p.grayworld);
  cfg.weights = {0, 0, 0, 0, 0, 0, 0};
  cfg.weights.depth_recon = 1.0;
  CHECK(total_loss(in, cfg).total.item() == p.depth_recon);

  LossConfig bad;
  bad.k_bs = 1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("backscatter loss never reaches the cloud") {
  std::mt19937_64 rng(5);
  const CameraView cam = testutil::front_camera(12, 14.0);
  const GaussianCloud c = testutil::random_cloud(rng, 10, 14.0, 6.0);
  const CloudParams cp = CloudParams::parameters(c);
  const RenderOutput out = render(cp, cam);
  const RgbImage i = testutil::random_image(rng, 12, 12, 0.05, 0.6);
  LossInputs in;
  in.captured = &i;
  in.true_color = out.color;
  in.depth = out.depth;
  in.alpha = out.alpha;
  const ad::Var raw = ad::parameter(MediumParams::initial().raw(), {9});
  in.medium = MediumVars::from_raw(raw);
  LossConfig cfg;
  cfg.weights = {0, 1, 0, 0, 0, 0, 0};
  ad::backward(total_loss(in, cfg).total);
  for (const ad::Var* v : {&cp.means, &cp.log_scales, &cp.rotations, &cp.opacity_logits, &cp.colors})
    for (double g : v->grad()) CHECK(g == 0.0);
  double medium_norm = 0.0;
  for (double g : raw.grad()) medium_norm += std::abs(g);
  CHECK(medium_norm > 0.0);
}
