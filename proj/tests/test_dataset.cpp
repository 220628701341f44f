#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include <unistd.h>

#include "doctest.h"
#include "uwsplat/dataset.hpp"
#include "uwsplat/errors.hpp"
#include "uwsplat/medium.hpp"

using namespace uwsplat;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = UWSPLAT_FIXTURES;

std::string error_of(const fs::path& dir) {
  try {
    load_colmap_text(dir);
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

fs::path scratch_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("uwsplat_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

SyntheticSpec single_view(std::size_t planes, double near_depth, double far_depth) {
  SyntheticSpec s;
  s.width = 24;
  s.height = 16;
  s.planes = planes;
  s.views = 1;
  s.near_depth = near_depth;
  s.far_depth = far_depth;
  s.arc_degrees = 0.0;
  s.range_jitter = 0.0;
  s.points_per_view = 10;
  s.supersample = 1;
  return s;
}

}  // namespace

TEST_CASE("colmap text export loads with exact values") {
  const ColmapScene s = load_colmap_text(kFixtures / "colmap_min");
  REQUIRE(s.images.size() == 2);
  // sorted by name
  CHECK(s.images[0].name == "frame_a.png");
  CHECK(s.images[1].name == "frame_b.png");

  const CameraView& b = s.images[1].camera;
  CHECK(b.width == 64);
  CHECK(b.height == 48);
  CHECK(b.intrinsics.fx == 50.5);
  CHECK(b.intrinsics.fy == 52.25);
  CHECK(b.intrinsics.cx == 32.0);
  CHECK(b.intrinsics.cy == 24.0);
  CHECK(b.rotation.isIdentity(0.0));
  CHECK(b.translation == Eigen::Vector3d(0.5, -0.25, 2.0));

  // SIMPLE_PINHOLE shares its focal length; quaternion is 90 degrees about y
  const CameraView& a = s.images[0].camera;
  CHECK(a.intrinsics.fx == 40.0);
  CHECK(a.intrinsics.fy == 40.0);
  CHECK(a.intrinsics.cx == 16.5);
  CHECK(a.intrinsics.cy == 15.5);
  Eigen::Matrix3d ry;
  ry << 0, 0, 1, 0, 1, 0, -1, 0, 0;
  CHECK((a.rotation - ry).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(a.to_camera({1, 0, 0}).norm() < 1e-15);  // translation (0, 0, 1) cancels the rotated x axis

  REQUIRE(s.points.size() == 3);
  CHECK(s.points[0].position == Eigen::Vector3d(0.1, 0.2, 3.0));
  CHECK(s.points[0].color == Eigen::Vector3d(1.0, 0.0, 0.2));
  CHECK(s.points[1].color.z() == doctest::Approx(30.0 / 255.0).epsilon(1e-15));
  CHECK(s.points[2].position.z() == 4.0);
}

TEST_CASE("unsupported camera model is named in the error") {
  const std::string e = error_of(kFixtures / "colmap_radial");
  CHECK(e.find("RADIAL") != std::string::npos);
  CHECK(e.find("cameras.txt:2") != std::string::npos);
}

TEST_CASE("malformed image line is reported with its line number") {
  const std::string e = error_of(kFixtures / "colmap_malformed");
  CHECK(e.find("images.txt:4") != std::string::npos);
  CHECK(error_of(kFixtures / "does_not_exist").find("cannot open") != std::string::npos);
}

TEST_CASE("colmap text survives a write and reload") {
  const ColmapScene s = load_colmap_text(kFixtures / "colmap_min");
  const fs::path dir = scratch_dir("colmap");
  save_colmap_text(s, dir);
  const ColmapScene r = load_colmap_text(dir);
  REQUIRE(r.images.size() == s.images.size());
  for (std::size_t i = 0; i < s.images.size(); ++i) {
    CHECK(r.images[i].name == s.images[i].name);
    CHECK((r.images[i].camera.rotation - s.images[i].camera.rotation).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(r.images[i].camera.translation == s.images[i].camera.translation);
    CHECK(r.images[i].camera.intrinsics.fx == s.images[i].camera.intrinsics.fx);
    CHECK(r.images[i].camera.width == s.images[i].camera.width);
  }
  REQUIRE(r.points.size() == 3);
  CHECK(r.points[1].position == s.points[1].position);
  CHECK(r.points[1].color == s.points[1].color);
  fs::remove_all(dir);
}

TEST_CASE("default split sends every 8th frame to test") {
  SceneDataset ds;
  ds.frames.resize(17);
  assign_default_split(ds);
  CHECK(ds.test == std::vector<std::size_t>{0, 8, 16});
  CHECK(ds.train.size() == 14);
  CHECK(ds.train.front() == 1);
}

TEST_CASE("single fronto-parallel plane gives constant depth") {
  const SceneDataset ds = generate_synthetic_scene(5, single_view(1, 2.0, 2.0));
  REQUIRE(ds.frames.size() == 1);
  for (float z : ds.frames[0].depth->data()) CHECK(z == 2.0f);
  CHECK(!ds.points.empty());
  for (const SparsePoint& p : ds.points) CHECK(p.position.z() == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("depth is the nearest surface along each ray") {
  const SceneDataset ds = generate_synthetic_scene(3, single_view(2, 1.0, 3.0));
  const ScalarMap& z = *ds.frames[0].depth;
  std::size_t near = 0, far = 0;
  for (float v : z.data()) {
    CHECK(v <= 3.0f);
    if (v == 3.0f) ++far;
    if (v < 2.0f) ++near;
  }
  // the tilted near plane covers part of the view and hides the backdrop there
  CHECK(near > 0);
  CHECK(far > 0);
  CHECK(near + far == z.data().size());
}

TEST_CASE("without a backdrop, rays can miss into open water") {
  SyntheticSpec s = single_view(2, 0.5, 0.8);
  s.backdrop = false;
  s.fov_degrees = 100.0;
  const SceneDataset ds = generate_synthetic_scene(1, s);
  const Frame& f = ds.frames[0];
  std::size_t misses = 0;
  for (std::size_t y = 0; y < f.image.height(); ++y)
    for (std::size_t x = 0; x < f.image.width(); ++x) {
      if (std::isfinite(f.depth->at(x, y))) continue;
      ++misses;
      for (int c = 0; c < 3; ++c) CHECK(f.image.at(x, y, c) == 0.0);
    }
  CHECK(misses > 0);

  SceneDataset wet = ds;
  apply_medium(wet, MediumParams::preset(MediumPreset::kWater));
  const Rgb inf = MediumParams::preset(MediumPreset::kWater).b_inf();
  for (std::size_t y = 0; y < f.image.height(); ++y)
    for (std::size_t x = 0; x < f.image.width(); ++x)
      if (!std::isfinite(f.depth->at(x, y)))
        for (int c = 0; c < 3; ++c) CHECK(wet.frames[0].image.at(x, y, c) == doctest::Approx(inf[c]).epsilon(1e-12));
}

TEST_CASE("same seed gives the same dataset") {
  SyntheticSpec s;
  s.width = s.height = 16;
  s.views = 4;
  s.supersample = 1;
  const SceneDataset a = generate_synthetic_scene(42, s);
  const SceneDataset b = generate_synthetic_scene(42, s);
  const SceneDataset c = generate_synthetic_scene(43, s);
  REQUIRE(a.frames.size() == b.frames.size());
  for (std::size_t i = 0; i < a.frames.size(); ++i) {
    CHECK(a.frames[i].image.data() == b.frames[i].image.data());
    CHECK(a.frames[i].depth->data() == b.frames[i].depth->data());
    CHECK(a.frames[i].camera.rotation == b.frames[i].camera.rotation);
  }
  REQUIRE(a.points.size() == b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) CHECK(a.points[i].position == b.points[i].position);
  CHECK(a.frames[0].image.data() != c.frames[0].image.data());
}

TEST_CASE("synthetic spec rejects bad input") {
  SyntheticSpec s;
  s.planes = 0;
  CHECK_THROWS_AS(generate_synthetic_scene(1, s), std::invalid_argument);
  s = {};
  s.views = 0;
  CHECK_THROWS_AS(generate_synthetic_scene(1, s), std::invalid_argument);
  s = {};
  s.color_min = 0.8;
  s.color_max = 0.5;
  CHECK_THROWS_AS(generate_synthetic_scene(1, s), std::invalid_argument);
}

TEST_CASE("apply_medium degrades images and keeps the truth") {
  SceneDataset ds = generate_synthetic_scene(9, single_view(3, 1.0, 4.0));
  const RgbImage clean = ds.frames[0].image;
  const MediumParams p = MediumParams::preset(MediumPreset::kWater);
  apply_medium(ds, p);
  REQUIRE(ds.medium_truth);
  CHECK(ds.medium_truth->b_inf_raw == p.b_inf_raw);
  CHECK(ds.frames[0].true_color->data() == clean.data());
  const RgbImage expect = compose(clean, *ds.frames[0].depth, p);
  CHECK(ds.frames[0].image.data() == expect.data());
  // point colors follow the degraded pixels they were sampled from
  const PointSource& src = ds.point_sources[0];
  for (int c = 0; c < 3; ++c) CHECK(ds.points[0].color[c] == ds.frames[0].image.at(src.x, src.y, c));

  SceneDataset no_depth = ds;
  no_depth.frames[0].depth.reset();
  CHECK_THROWS_AS(apply_medium(no_depth, p), DataError);
}

TEST_CASE("dataset directory round trip") {
  SyntheticSpec s;
  s.width = s.height = 12;
  s.views = 9;
  s.supersample = 1;
  SceneDataset ds = generate_synthetic_scene(2, s);
  apply_medium(ds, MediumParams::preset(MediumPreset::kFog));
  const fs::path dir = scratch_dir("dataset");
  save_dataset(ds, dir);
  const SceneDataset r = load_dataset(dir);
  REQUIRE(r.frames.size() == ds.frames.size());
  CHECK(r.train == ds.train);
  CHECK(r.test == ds.test);
  REQUIRE(r.medium_truth);
  CHECK(r.medium_truth->beta_d_raw == ds.medium_truth->beta_d_raw);
  for (std::size_t i = 0; i < r.frames.size(); ++i) {
    CHECK(r.frames[i].name == ds.frames[i].name);
    CHECK(r.frames[i].depth->data() == ds.frames[i].depth->data());
    CHECK((r.frames[i].camera.rotation - ds.frames[i].camera.rotation).cwiseAbs().maxCoeff() < 1e-12);
    double worst = 0;
    for (std::size_t k = 0; k < r.frames[i].image.data().size(); ++k)
      worst = std::max(worst, std::abs(r.frames[i].image.data()[k] - ds.frames[i].image.data()[k]));
    CHECK(worst <= 0.5 / 65535 + 1e-12);
  }
  REQUIRE(r.points.size() == ds.points.size());
  CHECK((r.points[3].position - ds.points[3].position).norm() < 1e-12);

  // a split naming an unknown image is rejected
  {
    std::ofstream(dir / "split.txt", std::ios::app) << "ghost.png test\n";
  }
  CHECK_THROWS_AS(load_dataset(dir), DataError);
  fs::remove_all(dir);
  CHECK_THROWS_AS(load_dataset(dir), DataError);
}
