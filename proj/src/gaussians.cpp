#include "uwsplat/gaussians.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

#include "uwsplat/camera.hpp"
#include "uwsplat/errors.hpp"

namespace uwsplat {

double opacity_from_logit(double logit) { return 1.0 / (1.0 + std::exp(-logit)); }

double logit_from_opacity(double opacity) {
  const double o = std::clamp(opacity, 1e-12, 1.0 - 1e-12);
  return std::log(o / (1.0 - o));
}

Eigen::Matrix3d Gaussian::covariance() const {
  const Eigen::Matrix3d r = quaternion_to_matrix(rotation[0], rotation[1], rotation[2], rotation[3]);
  const Eigen::Vector3d s = scale();
  return r * s.array().square().matrix().asDiagonal() * r.transpose();
}

Gaussian Gaussian::isotropic(const Eigen::Vector3d& mean, double sigma, double opacity, const Eigen::Vector3d& color) {
  Gaussian g;
  g.mean = mean;
  g.log_scale = Eigen::Vector3d::Constant(std::log(sigma));
  g.opacity_logit = logit_from_opacity(opacity);
  g.color = color;
  return g;
}

void GaussianCloud::push_back(const Gaussian& g) {
  means.insert(means.end(), {g.mean[0], g.mean[1], g.mean[2]});
  log_scales.insert(log_scales.end(), {g.log_scale[0], g.log_scale[1], g.log_scale[2]});
  rotations.insert(rotations.end(), {g.rotation[0], g.rotation[1], g.rotation[2], g.rotation[3]});
  opacity_logits.push_back(g.opacity_logit);
  colors.insert(colors.end(), {g.color[0], g.color[1], g.color[2]});
}

Gaussian GaussianCloud::get(std::size_t i) const {
  Gaussian g;
  g.mean = Eigen::Vector3d(means[3 * i], means[3 * i + 1], means[3 * i + 2]);
  g.log_scale = Eigen::Vector3d(log_scales[3 * i], log_scales[3 * i + 1], log_scales[3 * i + 2]);
  g.rotation = Eigen::Vector4d(rotations[4 * i], rotations[4 * i + 1], rotations[4 * i + 2], rotations[4 * i + 3]);
  g.opacity_logit = opacity_logits[i];
  g.color = Eigen::Vector3d(colors[3 * i], colors[3 * i + 1], colors[3 * i + 2]);
  return g;
}

void GaussianCloud::set(std::size_t i, const Gaussian& g) {
  for (int k = 0; k < 3; ++k) {
    means[3 * i + k] = g.mean[k];
    log_scales[3 * i + k] = g.log_scale[k];
    colors[3 * i + k] = g.color[k];
  }
  for (int k = 0; k < 4; ++k) rotations[4 * i + k] = g.rotation[k];
  opacity_logits[i] = g.opacity_logit;
}

namespace {

template <std::size_t Stride>
void compact(std::vector<double>& v, const std::vector<bool>& keep) {
  std::size_t out = 0;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (!keep[i]) continue;
    for (std::size_t k = 0; k < Stride; ++k) v[out * Stride + k] = v[i * Stride + k];
    ++out;
  }
  v.resize(out * Stride);
}

}  // namespace

void GaussianCloud::filter(const std::vector<bool>& keep) {
  if (keep.size() != size()) throw std::invalid_argument("GaussianCloud::filter: mask size mismatch");
  compact<3>(means, keep);
  compact<3>(log_scales, keep);
  compact<4>(rotations, keep);
  compact<1>(opacity_logits, keep);
  compact<3>(colors, keep);
}

void GaussianCloud::validate() const {
  const std::size_t n = size();
  if (means.size() != 3 * n || log_scales.size() != 3 * n || rotations.size() != 4 * n || colors.size() != 3 * n) {
    throw std::invalid_argument("GaussianCloud: parameter buffers have inconsistent lengths");
  }
}

namespace {

constexpr char kMagic[4] = {'U', 'W', 'G', 'S'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kValuesPerSplat = 14;

template <class U>
void put_le(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

template <class U>
U get_le(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(U) > in.size()) throw DataError("cloud file truncated");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += sizeof(U);
  return v;
}

}  // namespace

void save_cloud(const GaussianCloud& cloud, const std::filesystem::path& path) {
  cloud.validate();
  std::string out(kMagic, 4);
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint32_t>(out, kValuesPerSplat);
  put_le<std::uint64_t>(out, cloud.size());
  auto put = [&out](double v) { put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v)); };
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (int k = 0; k < 3; ++k) put(cloud.means[3 * i + k]);
    for (int k = 0; k < 3; ++k) put(cloud.log_scales[3 * i + k]);
    for (int k = 0; k < 4; ++k) put(cloud.rotations[4 * i + k]);
    put(cloud.opacity_logits[i]);
    for (int k = 0; k < 3; ++k) put(cloud.colors[3 * i + k]);
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw DataError("short write to " + path.string());
}

GaussianCloud load_cloud(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open " + path.string());
  const std::string in((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (in.size() < 20 || std::memcmp(in.data(), kMagic, 4) != 0) throw DataError("not a cloud file: " + path.string());
  std::size_t pos = 4;
  const auto version = get_le<std::uint32_t>(in, pos);
  const auto per = get_le<std::uint32_t>(in, pos);
  if (version != kVersion || per != kValuesPerSplat) {
    throw DataError("unsupported cloud format version " + std::to_string(version) + " in " + path.string());
  }
  const auto count = get_le<std::uint64_t>(in, pos);
  if (in.size() != pos + count * kValuesPerSplat * 8) throw DataError("cloud file size mismatch: " + path.string());
  GaussianCloud c;
  auto get = [&]() { return std::bit_cast<double>(get_le<std::uint64_t>(in, pos)); };
  for (std::uint64_t i = 0; i < count; ++i) {
    for (int k = 0; k < 3; ++k) c.means.push_back(get());
    for (int k = 0; k < 3; ++k) c.log_scales.push_back(get());
    for (int k = 0; k < 4; ++k) c.rotations.push_back(get());
    c.opacity_logits.push_back(get());
    for (int k = 0; k < 3; ++k) c.colors.push_back(get());
  }
  return c;
}

void export_point_cloud_ply(const GaussianCloud& cloud, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path.string());
  f << "ply\nformat ascii 1.0\nelement vertex " << cloud.size()
    << "\nproperty float x\nproperty float y\nproperty float z\n"
       "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    f << cloud.means[3 * i] << ' ' << cloud.means[3 * i + 1] << ' ' << cloud.means[3 * i + 2];
    for (int k = 0; k < 3; ++k) f << ' ' << std::lround(std::clamp(cloud.colors[3 * i + k], 0.0, 1.0) * 255.0);
    f << '\n';
  }
}

}  // namespace uwsplat
