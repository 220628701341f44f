#include "uwsplat/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "uwsplat/errors.hpp"
#include "uwsplat/image_io.hpp"

namespace uwsplat {

namespace fs = std::filesystem;

void SceneDataset::validate() const {
  std::vector<int> seen(frames.size(), 0);
  for (const auto* split : {&train, &test})
    for (std::size_t i : *split) {
      if (i >= frames.size()) throw std::invalid_argument("dataset: split index out of range");
      ++seen[i];
    }
  for (int s : seen)
    if (s != 1) throw std::invalid_argument("dataset: train/test split must cover every frame exactly once");
  for (const Frame& f : frames) {
    f.camera.validate();
    if (f.image.width() != f.camera.width || f.image.height() != f.camera.height)
      throw std::invalid_argument("dataset: image " + f.name + " does not match its camera size");
    if (f.depth && !f.depth->same_size(f.image)) throw std::invalid_argument("dataset: depth size differs for " + f.name);
    if (f.true_color && !f.true_color->same_size(f.image))
      throw std::invalid_argument("dataset: true color size differs for " + f.name);
  }
  if (!point_sources.empty() && point_sources.size() != points.size())
    throw std::invalid_argument("dataset: point sources do not match points");
}

void assign_default_split(SceneDataset& ds) {
  ds.train.clear();
  ds.test.clear();
  for (std::size_t i = 0; i < ds.frames.size(); ++i) (i % 8 == 0 ? ds.test : ds.train).push_back(i);
}

namespace {

std::string stem(const std::string& name) { return fs::path(name).stem().string(); }

}  // namespace

SceneDataset load_dataset(const fs::path& root) {
  if (!fs::is_directory(root)) throw DataError("dataset directory not found: " + root.string());
  const ColmapScene scene = load_colmap_text(root / "sparse");
  SceneDataset ds;
  ds.points = scene.points;
  for (const auto& img : scene.images) {
    Frame f;
    f.name = img.name;
    f.camera = img.camera;
    f.image = load_image(root / "images" / img.name);
    if (f.image.width() != f.camera.width || f.image.height() != f.camera.height)
      throw DataError("image " + img.name + " does not match the size of its camera");
    const fs::path dpath = root / "depth" / (stem(img.name) + ".fmap");
    if (fs::exists(dpath)) {
      f.depth = load_scalar_map(dpath);
      if (!f.depth->same_size(f.image)) throw DataError("depth map size differs from image " + img.name);
    }
    const fs::path tpath = root / "truth" / img.name;
    if (fs::exists(tpath)) {
      f.true_color = load_image(tpath);
      if (!f.true_color->same_size(f.image)) throw DataError("truth image size differs from image " + img.name);
    }
    ds.frames.push_back(std::move(f));
  }
  if (ds.frames.empty()) throw DataError("dataset has no frames: " + root.string());

  const fs::path split = root / "split.txt";
  if (fs::exists(split)) {
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < ds.frames.size(); ++i) index[ds.frames[i].name] = i;
    std::ifstream in(split);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      std::istringstream ls(line);
      std::string name, which;
      if (!(ls >> name)) continue;
      const auto it = index.find(name);
      if (!(ls >> which) || (which != "train" && which != "test") || it == index.end())
        throw DataError(split.string() + ":" + std::to_string(line_no) + ": expected '<known image> train|test'");
      (which == "test" ? ds.test : ds.train).push_back(it->second);
    }
    std::sort(ds.train.begin(), ds.train.end());
    std::sort(ds.test.begin(), ds.test.end());
  } else {
    assign_default_split(ds);
  }

  if (fs::exists(root / "truth" / "medium.txt")) ds.medium_truth = load_medium(root / "truth" / "medium.txt");
  try {
    ds.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string(e.what()) + " (" + root.string() + ")");
  }
  return ds;
}

void save_dataset(const SceneDataset& ds, const fs::path& root) {
  ds.validate();
  fs::create_directories(root / "images");
  fs::create_directories(root / "sparse");
  ColmapScene scene;
  scene.points = ds.points;
  for (const Frame& f : ds.frames) {
    scene.images.push_back({f.name, f.camera});
    save_image(f.image, root / "images" / f.name, PngDepth::k16);
    if (f.depth) {
      fs::create_directories(root / "depth");
      save_scalar_map(*f.depth, root / "depth" / (stem(f.name) + ".fmap"));
    }
    if (f.true_color) {
      fs::create_directories(root / "truth");
      save_image(*f.true_color, root / "truth" / f.name, PngDepth::k16);
    }
  }
  save_colmap_text(scene, root / "sparse");
  if (ds.medium_truth) {
    fs::create_directories(root / "truth");
    save_medium(*ds.medium_truth, root / "truth" / "medium.txt");
  }
  std::ofstream split(root / "split.txt");
  std::vector<const char*> role(ds.frames.size(), "train");
  for (std::size_t i : ds.test) role[i] = "test";
  for (std::size_t i = 0; i < ds.frames.size(); ++i) split << ds.frames[i].name << ' ' << role[i] << '\n';
  if (!split) throw DataError("cannot write " + (root / "split.txt").string());
}

void apply_medium(SceneDataset& ds, const MediumParams& params) {
  for (Frame& f : ds.frames) {
    if (!f.depth) throw DataError("apply_medium: frame " + f.name + " has no depth");
    if (!f.true_color) f.true_color = f.image;
    f.image = compose(*f.true_color, *f.depth, params);
  }
  for (std::size_t k = 0; k < ds.point_sources.size(); ++k) {
    const PointSource& s = ds.point_sources[k];
    for (int c = 0; c < 3; ++c) ds.points[k].color[c] = ds.frames[s.frame].image.at(s.x, s.y, c);
  }
  ds.medium_truth = params;
}

}  // namespace uwsplat
