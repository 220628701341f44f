#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include <Eigen/Geometry>

#include "uwsplat/config.hpp"
#include "uwsplat/dataset.hpp"
#include "uwsplat/errors.hpp"

namespace uwsplat {

void SyntheticSpec::validate() const {
  if (width < 2 || height < 2) throw std::invalid_argument("synthetic spec: image must be at least 2x2");
  if (planes == 0) throw std::invalid_argument("synthetic spec: no planes");
  if (views == 0) throw std::invalid_argument("synthetic spec: no views");
  if (!(near_depth > 0.05) || !(far_depth >= near_depth))
    throw std::invalid_argument("synthetic spec: need 0.05 < near_depth <= far_depth");
  if (!(fov_degrees > 1.0 && fov_degrees < 150.0)) throw std::invalid_argument("synthetic spec: fov out of range");
  if (!(arc_degrees >= 0.0 && arc_degrees < 120.0)) throw std::invalid_argument("synthetic spec: arc out of range");
  if (!(range_jitter >= 0.0 && range_jitter < 0.9)) throw std::invalid_argument("synthetic spec: jitter out of range");
  if (supersample == 0) throw std::invalid_argument("synthetic spec: supersample must be >= 1");
  if (!(point_noise >= 0.0)) throw std::invalid_argument("synthetic spec: negative point noise");
  if (!(color_min >= 0.0 && color_min <= color_max && color_max <= 1.0))
    throw std::invalid_argument("synthetic spec: need 0 <= color_min <= color_max <= 1");
  if (!(dark_fraction >= 0.0 && dark_fraction <= 1.0)) throw std::invalid_argument("synthetic spec: dark_fraction out of range");
}

SyntheticSpec SyntheticSpec::from_file(const std::filesystem::path& path) {
  const KeyValueFile kv = KeyValueFile::load(path);
  SyntheticSpec s;
  auto count = [&](const char* key, std::size_t fallback) {
    const long long v = kv.get_int(key, static_cast<long long>(fallback));
    if (v < 0) throw DataError(path.string() + ": '" + key + "' must be non-negative");
    return static_cast<std::size_t>(v);
  };
  s.width = count("width", s.width);
  s.height = count("height", s.height);
  s.planes = count("planes", s.planes);
  s.views = count("views", s.views);
  const std::string tex = kv.get_string("texture", "checker");
  if (tex == "checker") {
    s.texture = TextureKind::kChecker;
  } else if (tex == "noise") {
    s.texture = TextureKind::kNoise;
  } else {
    throw DataError(path.string() + ": texture must be checker or noise, got '" + tex + "'");
  }
  s.near_depth = kv.get_double("near_depth", s.near_depth);
  s.far_depth = kv.get_double("far_depth", s.far_depth);
  s.fov_degrees = kv.get_double("fov_degrees", s.fov_degrees);
  s.arc_degrees = kv.get_double("arc_degrees", s.arc_degrees);
  s.range_jitter = kv.get_double("range_jitter", s.range_jitter);
  s.backdrop = kv.get_bool("backdrop", s.backdrop);
  s.color_min = kv.get_double("color_min", s.color_min);
  s.color_max = kv.get_double("color_max", s.color_max);
  s.dark_fraction = kv.get_double("dark_fraction", s.dark_fraction);
  s.points_per_view = count("points_per_view", s.points_per_view);
  s.point_noise = kv.get_double("point_noise", s.point_noise);
  s.supersample = count("supersample", s.supersample);
  if (const auto extra = kv.unused_keys(); !extra.empty()) throw DataError(path.string() + ": unknown key '" + extra[0] + "'");
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return s;
}

namespace {

struct Plane {
  Eigen::Vector3d center;
  Eigen::Vector3d normal;  // facing the cameras
  Eigen::Vector3d u_axis;
  Eigen::Vector3d v_axis;
  double half_u = 0.0;
  double half_v = 0.0;
  double cell = 0.1;  // texture period in meters
  Eigen::Vector3d color_a;
  Eigen::Vector3d color_b;
  std::uint64_t salt = 0;
};

std::uint64_t mix(std::uint64_t x) {
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdULL;
  x ^= x >> 33;
  x *= 0xc4ceb9fe1a85ec53ULL;
  x ^= x >> 33;
  return x;
}

double cell_random(std::uint64_t salt, long i, long j, std::uint64_t channel) {
  const std::uint64_t h = mix(salt ^ mix(static_cast<std::uint64_t>(i) * 0x9e3779b97f4a7c15ULL ^
                                         mix(static_cast<std::uint64_t>(j) + channel * 0x632be59bd9b4e019ULL)));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

const Eigen::Vector3d kDark{0.02, 0.02, 0.02};

Eigen::Vector3d texture(const Plane& p, TextureKind kind, double dark_fraction, double u, double v) {
  const double fu = u / p.cell, fv = v / p.cell;
  const long i = static_cast<long>(std::floor(fu));
  const long j = static_cast<long>(std::floor(fv));
  if (kind == TextureKind::kChecker) {
    if (cell_random(p.salt, i, j, 0) < dark_fraction) return kDark;
    return ((i + j) & 1) ? p.color_a : p.color_b;
  }
  // value noise, smoothstep-blended lattice colors
  const double tu = fu - i, tv = fv - j;
  const double su = tu * tu * (3 - 2 * tu), sv = tv * tv * (3 - 2 * tv);
  auto lattice = [&](long a, long b) -> Eigen::Vector3d {
    if (cell_random(p.salt, a, b, 0) < dark_fraction) return kDark;
    const double m = cell_random(p.salt, a, b, 1);
    return m * p.color_a + (1 - m) * p.color_b;
  };
  return (1 - sv) * ((1 - su) * lattice(i, j) + su * lattice(i + 1, j)) +
         sv * ((1 - su) * lattice(i, j + 1) + su * lattice(i + 1, j + 1));
}

Eigen::Matrix3d rotation_y(double rad) { return Eigen::AngleAxisd(rad, Eigen::Vector3d::UnitY()).toRotationMatrix(); }
Eigen::Matrix3d rotation_x(double rad) { return Eigen::AngleAxisd(rad, Eigen::Vector3d::UnitX()).toRotationMatrix(); }

std::vector<Plane> build_planes(std::mt19937_64& rng, const SyntheticSpec& spec) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double deg = std::numbers::pi / 180.0;
  const double tan_half = std::tan(spec.fov_degrees * deg / 2);
  std::vector<Plane> planes;
  for (std::size_t k = 0; k < spec.planes; ++k) {
    Plane p;
    const bool last = k + 1 == spec.planes;
    const bool backdrop = spec.backdrop && last;
    const double depth = spec.planes == 1 ? spec.far_depth
                                          : spec.near_depth + (spec.far_depth - spec.near_depth) * k / (spec.planes - 1);
    Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
    if (backdrop) {
      p.center = {0.0, 0.0, depth};
      p.half_u = p.half_v = 50.0 * depth;
    } else {
      const double side = (k % 2 == 0) ? -1.0 : 1.0;
      const double reach = depth * tan_half;
      p.center = {side * reach * (0.2 + 0.2 * u(rng)), (u(rng) - 0.5) * reach * 0.4, depth};
      p.half_u = reach * (0.45 + 0.15 * u(rng));
      p.half_v = reach * (0.45 + 0.15 * u(rng));
      if (last) {
        // bounded rear wall with open water around it
        p.center.x() = (u(rng) - 0.5) * reach * 0.2;
        p.half_u = p.half_v = reach;
      }
      r = rotation_y(side * (10.0 + 15.0 * u(rng)) * deg) * rotation_x((u(rng) - 0.5) * 20.0 * deg);
    }
    p.normal = r * Eigen::Vector3d(0, 0, -1);
    p.u_axis = r * Eigen::Vector3d(1, 0, 0);
    p.v_axis = r * Eigen::Vector3d(0, 1, 0);
    // about five pixels per cell at the plane's nominal depth
    p.cell = 5.0 * depth * 2.0 * tan_half / static_cast<double>(spec.width);
    for (int c = 0; c < 3; ++c) {
      p.color_a[c] = spec.color_min + (spec.color_max - spec.color_min) * u(rng);
      p.color_b[c] = spec.color_min + (spec.color_max - spec.color_min) * u(rng);
    }
    p.salt = rng();
    planes.push_back(p);
  }
  return planes;
}

struct Hit {
  double depth = 0.0;  // camera z
  const Plane* plane = nullptr;
  Eigen::Vector3d point;
};

Hit cast(const std::vector<Plane>& planes, const CameraView& cam, double px, double py) {
  const Intrinsics& in = cam.intrinsics;
  const Eigen::Vector3d d_cam((px - in.cx) / in.fx, (py - in.cy) / in.fy, 1.0);
  const Eigen::Vector3d d = cam.rotation.transpose() * d_cam;
  const Eigen::Vector3d o = cam.center();
  Hit best;
  best.depth = std::numeric_limits<double>::infinity();
  for (const Plane& p : planes) {
    const double denom = p.normal.dot(d);
    if (std::abs(denom) < 1e-12) continue;
    const double t = p.normal.dot(p.center - o) / denom;
    if (!(t > 1e-6) || t >= best.depth) continue;
    const Eigen::Vector3d x = o + t * d;
    const Eigen::Vector3d rel = x - p.center;
    if (std::abs(rel.dot(p.u_axis)) > p.half_u || std::abs(rel.dot(p.v_axis)) > p.half_v) continue;
    best = {t, &p, x};
  }
  return best;
}

Eigen::Vector3d shade(const Hit& h, const SyntheticSpec& spec) {
  if (!h.plane) return Eigen::Vector3d::Zero();
  const Eigen::Vector3d rel = h.point - h.plane->center;
  return texture(*h.plane, spec.texture, spec.dark_fraction, rel.dot(h.plane->u_axis), rel.dot(h.plane->v_axis));
}

}  // namespace

SceneDataset generate_synthetic_scene(std::uint64_t seed, const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(seed);
  const std::vector<Plane> planes = build_planes(rng, spec);
  const double deg = std::numbers::pi / 180.0;

  Intrinsics intr;
  intr.fx = intr.fy = (spec.width / 2.0) / std::tan(spec.fov_degrees * deg / 2);
  intr.cx = spec.width / 2.0;
  intr.cy = spec.height / 2.0;

  const double target_z = 0.5 * (spec.near_depth + spec.far_depth);
  const Eigen::Vector3d target(0, 0, target_z);
  SceneDataset ds;
  const std::size_t ss = spec.supersample;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  for (std::size_t v = 0; v < spec.views; ++v) {
    const double s = spec.views == 1 ? 0.5 : static_cast<double>(v) / (spec.views - 1);
    const double yaw = (s - 0.5) * spec.arc_degrees * deg;
    const double pitch = 0.15 * spec.arc_degrees * deg * std::sin(2.0 * std::numbers::pi * s);
    // golden-ratio sequence so neighboring views sit at different ranges
    const double g = std::fmod(0.5 + v * 0.6180339887498949, 1.0);
    const double dist = target_z * (1.0 + spec.range_jitter * (2.0 * g - 1.0));
    const Eigen::Vector3d eye = target + rotation_y(yaw) * rotation_x(pitch) * Eigen::Vector3d(0, 0, -dist);

    Frame f;
    char name[32];
    std::snprintf(name, sizeof name, "view_%03zu.png", v);
    f.name = name;
    f.camera = CameraView::look_at(eye, target, {0, -1, 0}, intr, spec.width, spec.height);
    f.image = RgbImage(spec.width, spec.height);
    ScalarMap depth(spec.width, spec.height);
    for (std::size_t y = 0; y < spec.height; ++y) {
      for (std::size_t x = 0; x < spec.width; ++x) {
        depth.at(x, y) = static_cast<float>(cast(planes, f.camera, x + 0.5, y + 0.5).depth);
        Eigen::Vector3d acc = Eigen::Vector3d::Zero();
        for (std::size_t sy = 0; sy < ss; ++sy)
          for (std::size_t sx = 0; sx < ss; ++sx)
            acc += shade(cast(planes, f.camera, x + (sx + 0.5) / ss, y + (sy + 0.5) / ss), spec);
        acc /= static_cast<double>(ss * ss);
        for (int c = 0; c < 3; ++c) f.image.at(x, y, c) = acc[c];
      }
    }
    f.depth = std::move(depth);
    f.true_color = f.image;

    for (std::size_t k = 0; k < spec.points_per_view; ++k) {
      const std::size_t px = std::min<std::size_t>(spec.width - 1, static_cast<std::size_t>(u(rng) * spec.width));
      const std::size_t py = std::min<std::size_t>(spec.height - 1, static_cast<std::size_t>(u(rng) * spec.height));
      const Hit h = cast(planes, f.camera, px + 0.5, py + 0.5);
      if (!h.plane) continue;
      SparsePoint sp;
      sp.position = h.point + spec.point_noise * Eigen::Vector3d(noise(rng), noise(rng), noise(rng));
      for (int c = 0; c < 3; ++c) sp.color[c] = f.image.at(px, py, c);
      ds.points.push_back(sp);
      ds.point_sources.push_back({v, px, py});
    }
    ds.frames.push_back(std::move(f));
  }
  assign_default_split(ds);
  return ds;
}

}  // namespace uwsplat
