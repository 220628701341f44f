#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include <Eigen/Geometry>

#include "uwsplat/dataset.hpp"
#include "uwsplat/errors.hpp"

namespace uwsplat {

namespace {

struct LineReader {
  std::filesystem::path path;
  std::ifstream in;
  int line_no = 0;

  explicit LineReader(const std::filesystem::path& p) : path(p), in(p) {
    if (!in) throw DataError("cannot open " + p.string());
  }

  // Next line that is not a comment. Blank lines are returned as-is.
  bool next(std::string& line) {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const auto first = line.find_first_not_of(" \t");
      if (first != std::string::npos && line[first] == '#') continue;
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + what);
  }
};

bool blank(const std::string& s) { return s.find_first_not_of(" \t") == std::string::npos; }

template <typename... T>
void read_fields(LineReader& r, std::istringstream& in, T&... out) {
  if (!(in >> ... >> out)) r.fail("malformed line");
}

struct CameraEntry {
  Intrinsics intr;
  std::size_t width = 0;
  std::size_t height = 0;
};

std::map<long, CameraEntry> read_cameras(const std::filesystem::path& path) {
  LineReader r(path);
  std::map<long, CameraEntry> cams;
  std::string line;
  while (r.next(line)) {
    if (blank(line)) continue;
    std::istringstream in(line);
    long id = 0;
    std::string model;
    CameraEntry c;
    read_fields(r, in, id, model, c.width, c.height);
    if (model == "PINHOLE") {
      read_fields(r, in, c.intr.fx, c.intr.fy, c.intr.cx, c.intr.cy);
    } else if (model == "SIMPLE_PINHOLE") {
      double f = 0;
      read_fields(r, in, f, c.intr.cx, c.intr.cy);
      c.intr.fx = c.intr.fy = f;
    } else {
      r.fail("unsupported camera model " + model + " (only PINHOLE and SIMPLE_PINHOLE)");
    }
    std::string extra;
    if (in >> extra) r.fail("unexpected trailing value '" + extra + "'");
    if (!(c.intr.fx > 0 && c.intr.fy > 0) || c.width == 0 || c.height == 0) r.fail("invalid camera parameters");
    if (!cams.emplace(id, c).second) r.fail("duplicate camera id " + std::to_string(id));
  }
  return cams;
}

}  // namespace

ColmapScene load_colmap_text(const std::filesystem::path& dir) {
  const auto cams = read_cameras(dir / "cameras.txt");
  ColmapScene scene;

  {
    LineReader r(dir / "images.txt");
    std::string line, points_line;
    while (r.next(line)) {
      if (blank(line)) continue;
      std::istringstream in(line);
      long id = 0, cam_id = 0;
      double qw, qx, qy, qz, tx, ty, tz;
      std::string name;
      read_fields(r, in, id, qw, qx, qy, qz, tx, ty, tz, cam_id, name);
      const auto it = cams.find(cam_id);
      if (it == cams.end()) r.fail("unknown camera id " + std::to_string(cam_id));
      const double qn = std::sqrt(qw * qw + qx * qx + qy * qy + qz * qz);
      if (!(qn > 0) || std::abs(qn - 1.0) > 1e-3) r.fail("quaternion is not unit length");
      ColmapScene::Image img;
      img.name = name;
      img.camera.intrinsics = it->second.intr;
      img.camera.width = it->second.width;
      img.camera.height = it->second.height;
      img.camera.rotation = quaternion_to_matrix(qw / qn, qx / qn, qy / qn, qz / qn);
      img.camera.translation = {tx, ty, tz};
      scene.images.push_back(img);
      // The observation line follows and may be empty.
      if (!r.next(points_line)) break;
    }
  }
  std::sort(scene.images.begin(), scene.images.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
  for (std::size_t i = 1; i < scene.images.size(); ++i)
    if (scene.images[i].name == scene.images[i - 1].name)
      throw DataError((dir / "images.txt").string() + ": duplicate image name " + scene.images[i].name);

  {
    LineReader r(dir / "points3D.txt");
    std::string line;
    while (r.next(line)) {
      if (blank(line)) continue;
      std::istringstream in(line);
      long id = 0;
      double x, y, z, err;
      int cr, cg, cb;
      read_fields(r, in, id, x, y, z, cr, cg, cb, err);
      if (cr < 0 || cr > 255 || cg < 0 || cg > 255 || cb < 0 || cb > 255) r.fail("color out of range");
      scene.points.push_back({{x, y, z}, {cr / 255.0, cg / 255.0, cb / 255.0}});
    }
  }
  return scene;
}

void save_colmap_text(const ColmapScene& scene, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  using Key = std::tuple<double, double, double, double, std::size_t, std::size_t>;
  std::map<Key, long> cam_ids;
  std::vector<long> image_cam(scene.images.size());
  for (std::size_t i = 0; i < scene.images.size(); ++i) {
    const CameraView& c = scene.images[i].camera;
    const Key k{c.intrinsics.fx, c.intrinsics.fy, c.intrinsics.cx, c.intrinsics.cy, c.width, c.height};
    auto it = cam_ids.find(k);
    if (it == cam_ids.end()) it = cam_ids.emplace(k, static_cast<long>(cam_ids.size()) + 1).first;
    image_cam[i] = it->second;
  }

  char buf[512];
  std::ofstream cams(dir / "cameras.txt");
  cams << "# CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n";
  std::vector<std::pair<long, Key>> ordered;
  for (const auto& [k, id] : cam_ids) ordered.emplace_back(id, k);
  std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [id, k] : ordered) {
    std::snprintf(buf, sizeof buf, "%ld PINHOLE %zu %zu %.17g %.17g %.17g %.17g\n", id, std::get<4>(k), std::get<5>(k),
                  std::get<0>(k), std::get<1>(k), std::get<2>(k), std::get<3>(k));
    cams << buf;
  }

  std::ofstream imgs(dir / "images.txt");
  imgs << "# IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n# POINTS2D[] as (X, Y, POINT3D_ID)\n";
  for (std::size_t i = 0; i < scene.images.size(); ++i) {
    const CameraView& c = scene.images[i].camera;
    Eigen::Quaterniond q(c.rotation);
    if (q.w() < 0) q.coeffs() *= -1.0;
    std::snprintf(buf, sizeof buf, "%zu %.17g %.17g %.17g %.17g %.17g %.17g %.17g %ld %s\n\n", i + 1, q.w(), q.x(),
                  q.y(), q.z(), c.translation.x(), c.translation.y(), c.translation.z(), image_cam[i],
                  scene.images[i].name.c_str());
    imgs << buf;
  }

  std::ofstream pts(dir / "points3D.txt");
  pts << "# POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[]\n";
  for (std::size_t i = 0; i < scene.points.size(); ++i) {
    const SparsePoint& p = scene.points[i];
    int rgb[3];
    for (int c = 0; c < 3; ++c) rgb[c] = static_cast<int>(std::lround(std::clamp(p.color[c], 0.0, 1.0) * 255.0));
    std::snprintf(buf, sizeof buf, "%zu %.17g %.17g %.17g %d %d %d 0\n", i + 1, p.position.x(), p.position.y(),
                  p.position.z(), rgb[0], rgb[1], rgb[2]);
    pts << buf;
  }
  if (!cams || !imgs || !pts) throw DataError("failed writing COLMAP files to " + dir.string());
}

}  // namespace uwsplat
