#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "uwsplat/camera.hpp"
#include "uwsplat/image.hpp"
#include "uwsplat/medium.hpp"

namespace uwsplat {

struct Frame {
  std::string name;  // file name under images/
  CameraView camera;
  RgbImage image;
  std::optional<ScalarMap> depth;       // ground-truth camera depth
  std::optional<RgbImage> true_color;   // ground truth without the medium
};

struct SparsePoint {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d color = Eigen::Vector3d::Zero();  // [0, 1]
};

struct PointSource {
  std::size_t frame = 0;
  std::size_t x = 0;
  std::size_t y = 0;
};

struct SceneDataset {
  std::vector<Frame> frames;
  std::vector<SparsePoint> points;
  std::vector<PointSource> point_sources;  // empty, or one pixel per point
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  std::optional<MediumParams> medium_truth;

  /// Throws std::invalid_argument when the split is not a disjoint cover of
  /// the frames or image sizes disagree with their cameras.
  void validate() const;
};

/// Every 8th frame (index 0, 8, 16, ...) goes to test, the rest to train.
void assign_default_split(SceneDataset& ds);

// COLMAP text export (cameras.txt, images.txt, points3D.txt). Only the
// PINHOLE and SIMPLE_PINHOLE models are accepted.
struct ColmapScene {
  struct Image {
    std::string name;
    CameraView camera;  // pose and intrinsics, size from its camera entry
  };
  std::vector<Image> images;  // sorted by name
  std::vector<SparsePoint> points;
};

/// Throws DataError naming the file and line for malformed input.
ColmapScene load_colmap_text(const std::filesystem::path& dir);
/// Writes one PINHOLE camera per distinct intrinsics/size pair.
void save_colmap_text(const ColmapScene& scene, const std::filesystem::path& dir);

/// Directory layout: images/ (PNG), depth/ (FMAP), sparse/ (COLMAP text),
/// truth/ (PNG + medium.txt when synthetic), split.txt.
SceneDataset load_dataset(const std::filesystem::path& root);
void save_dataset(const SceneDataset& ds, const std::filesystem::path& root);

enum class TextureKind { kChecker, kNoise };

struct SyntheticSpec {
  std::size_t width = 64;
  std::size_t height = 64;
  std::size_t planes = 3;
  std::size_t views = 24;
  TextureKind texture = TextureKind::kChecker;
  double near_depth = 1.5;  // nearest plane along the central view axis
  double far_depth = 4.0;   // farthest plane
  bool backdrop = true;     // farthest plane fills the view; otherwise rays may miss into open water (depth +inf)
  double fov_degrees = 60.0;
  double arc_degrees = 50.0;     // total sweep of the camera arc
  double range_jitter = 0.35;    // relative spread of camera distances
  double color_min = 0.45;       // plane colors are drawn per channel from [color_min, color_max]
  double color_max = 0.7;
  double dark_fraction = 0.2;    // share of texture cells that are near black
  std::size_t points_per_view = 60;
  double point_noise = 0.01;     // meters
  std::size_t supersample = 3;   // per axis, color only

  /// Parses "key = value" text; unknown keys are an error.
  static SyntheticSpec from_file(const std::filesystem::path& path);
  void validate() const;
};

/// Analytic ray-cast of textured planes. Each frame gets exact camera depth
/// at the pixel center and supersampled color; images equal true_color.
SceneDataset generate_synthetic_scene(std::uint64_t seed, const SyntheticSpec& spec);

/// Replaces images by compose(true color, depth, params), keeps the originals
/// as true_color and records the parameters. Sparse point colors are taken
/// from the degraded images they were sampled from when known. Throws
/// DataError when a frame has no depth.
void apply_medium(SceneDataset& ds, const MediumParams& params);

}  // namespace uwsplat
