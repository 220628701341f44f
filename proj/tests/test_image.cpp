#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "test_util.hpp"
#include "uwsplat/errors.hpp"
#include "uwsplat/image.hpp"
#include "uwsplat/image_io.hpp"

using namespace uwsplat;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "uwsplat_test_image";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("psnr closed forms") {
  RgbImage a(4, 4, 0.3), b(4, 4, 0.4);
  CHECK(psnr(a, b) == doctest::Approx(20.0));
  CHECK(psnr(a, a) == kPsnrInfinity);
  RgbImage zero(2, 2, 0.0), one(2, 2, 1.0);
  CHECK(psnr(zero, one) == doctest::Approx(0.0));
  CHECK_THROWS_AS(psnr(a, RgbImage(3, 4)), std::invalid_argument);
}

TEST_CASE("ssim identities") {
  std::mt19937_64 rng(1);
  const RgbImage a = testutil::random_image(rng, 16, 16);
  CHECK(ssim(a, a) == 1.0);

  // Constant images: mu_a = 0, mu_b = 1, no variance.
  const double c1 = 0.01 * 0.01;
  CHECK(ssim(RgbImage(12, 12, 0.0), RgbImage(12, 12, 1.0)) == doctest::Approx(c1 / (1.0 + c1)).epsilon(1e-12));

  RgbImage inv = a;
  for (double& v : inv.data()) v = 1.0 - v;
  CHECK(ssim(a, inv) < 0.5);

  CHECK_THROWS_AS(ssim(RgbImage(10, 12), RgbImage(10, 12)), std::invalid_argument);
  CHECK_THROWS_AS(ssim(RgbImage(12, 12), RgbImage(13, 12)), std::invalid_argument);
}

TEST_CASE("spatial gradients") {
  ScalarMap m(2, 1);
  m.at(0, 0) = 0.0f;
  m.at(1, 0) = 1.0f;
  const GradientMaps g = spatial_gradients(m);
  CHECK(g.gx.at(0, 0) == 1.0f);
  CHECK(g.gx.at(1, 0) == 0.0f);
  CHECK(g.gy.at(0, 0) == 0.0f);

  RgbImage img(3, 3);
  img.at(1, 1, 0) = 0.3;
  const GradientMaps gi = spatial_gradients(img);
  CHECK(gi.gx.at(0, 1) == doctest::Approx(0.1));
  CHECK(gi.gy.at(1, 0) == doctest::Approx(0.1));
  CHECK(gi.gx.at(2, 1) == 0.0f);

  CHECK_THROWS_AS(spatial_gradients(ScalarMap(1, 1)), std::invalid_argument);
}

TEST_CASE("png round trip") {
  std::mt19937_64 rng(2);
  const RgbImage img = testutil::random_image(rng, 9, 7);
  save_image(img, scratch("a16.png"), PngDepth::k16);
  const RgbImage back16 = load_image(scratch("a16.png"));
  REQUIRE(back16.same_size(img));
  for (std::size_t i = 0; i < img.data().size(); ++i) CHECK(std::abs(back16.data()[i] - img.data()[i]) <= 0.5 / 65535.0 + 1e-12);

  save_image(img, scratch("a8.png"));
  const RgbImage back8 = load_image(scratch("a8.png"));
  for (std::size_t i = 0; i < img.data().size(); ++i) CHECK(std::abs(back8.data()[i] - img.data()[i]) <= 0.5 / 255.0 + 1e-12);

  CHECK_THROWS_AS(load_image(scratch("missing.png")), DataError);
  std::ofstream(scratch("junk.png")) << "not a png";
  CHECK_THROWS_AS(load_image(scratch("junk.png")), DataError);
}

TEST_CASE("fmap round trip is bit exact") {
  std::mt19937_64 rng(3);
  const ScalarMap m = testutil::random_map(rng, 5, 3, -2.0, 7.0);
  save_scalar_map(m, scratch("m.fmap"));
  const ScalarMap back = load_scalar_map(scratch("m.fmap"));
  CHECK(back.width() == 5);
  CHECK(back.height() == 3);
  CHECK(back.data() == m.data());

  {
    std::ofstream f(scratch("bad.fmap"), std::ios::binary);
    f << "FMAX";
  }
  CHECK_THROWS_AS(load_scalar_map(scratch("bad.fmap")), DataError);

  // header claims more values than the file holds
  fs::copy_file(scratch("m.fmap"), scratch("short.fmap"), fs::copy_options::overwrite_existing);
  fs::resize_file(scratch("short.fmap"), fs::file_size(scratch("short.fmap")) - 4);
  CHECK_THROWS_AS(load_scalar_map(scratch("short.fmap")), DataError);
}
