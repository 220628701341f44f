#include <cstring>
#include <fstream>
#include <sstream>

#include "uwsplat/errors.hpp"
#include "uwsplat/trainer.hpp"

namespace uwsplat {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[4] = {'U', 'W', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

struct Writer {
  std::ofstream out;
  void u64(std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }
  void f64s(const std::vector<double>& v) {
    u64(v.size());
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
  void adam(const AdamState& s) {
    u64(s.step);
    f64s(s.m);
    f64s(s.v);
  }
  void text(const std::string& s) {
    u64(s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
};

struct Reader {
  std::ifstream in;
  std::string source;
  std::uint64_t u64() {
    std::uint64_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw DataError(source + ": truncated checkpoint state");
    return v;
  }
  std::size_t length(std::size_t elem) {
    const std::uint64_t n = u64();
    if (n > (std::uint64_t{1} << 34) / elem) throw DataError(source + ": implausible length in checkpoint state");
    return static_cast<std::size_t>(n);
  }
  std::vector<double> f64s() {
    std::vector<double> v(length(sizeof(double)));
    if (!in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double))))
      throw DataError(source + ": truncated checkpoint state");
    return v;
  }
  AdamState adam() {
    AdamState s;
    s.step = u64();
    s.m = f64s();
    s.v = f64s();
    return s;
  }
  std::string text() {
    std::string s(length(1), '\0');
    if (!in.read(s.data(), static_cast<std::streamsize>(s.size()))) throw DataError(source + ": truncated checkpoint state");
    return s;
  }
};

}  // namespace

void save_checkpoint(const TrainState& s, const fs::path& dir) {
  fs::create_directories(dir);
  save_cloud(s.cloud, dir / "cloud.bin");
  save_medium(s.medium, dir / "medium.txt");
  Writer w{std::ofstream(dir / "state.bin", std::ios::binary)};
  if (!w.out) throw DataError("cannot write " + (dir / "state.bin").string());
  w.out.write(kMagic, 4);
  w.u64(kVersion);
  w.u64(s.iteration);
  for (const AdamState* a : {&s.adam_means, &s.adam_scales, &s.adam_rotations, &s.adam_opacity, &s.adam_colors, &s.adam_medium})
    w.adam(*a);
  w.f64s(s.medium_grad_sum);
  w.f64s(s.stats.grad_accum);
  w.u64(s.stats.count.size());
  for (std::uint32_t c : s.stats.count) w.u64(c);
  w.u64(s.order.size());
  for (std::size_t i : s.order) w.u64(i);
  w.u64(s.order_pos);
  std::ostringstream rng;
  rng << s.rng;
  w.text(rng.str());
  if (!w.out) throw DataError("short write to " + (dir / "state.bin").string());
}

TrainState load_checkpoint(const fs::path& dir) {
  TrainState s;
  s.cloud = load_cloud(dir / "cloud.bin");
  s.medium = load_medium(dir / "medium.txt");
  Reader r{std::ifstream(dir / "state.bin", std::ios::binary), (dir / "state.bin").string()};
  if (!r.in) throw DataError("cannot open " + r.source);
  char magic[4];
  if (!r.in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw DataError(r.source + ": not a checkpoint state file");
  if (r.u64() != kVersion) throw DataError(r.source + ": unsupported checkpoint version");
  s.iteration = r.u64();
  for (AdamState* a : {&s.adam_means, &s.adam_scales, &s.adam_rotations, &s.adam_opacity, &s.adam_colors, &s.adam_medium})
    *a = r.adam();
  s.medium_grad_sum = r.f64s();
  s.stats.grad_accum = r.f64s();
  s.stats.count.resize(r.length(8));
  for (auto& c : s.stats.count) c = static_cast<std::uint32_t>(r.u64());
  s.order.resize(r.length(8));
  for (auto& i : s.order) i = static_cast<std::size_t>(r.u64());
  s.order_pos = static_cast<std::size_t>(r.u64());
  std::istringstream rng(r.text());
  rng >> s.rng;
  if (!rng) throw DataError(r.source + ": bad generator state");

  const std::size_t n = s.cloud.size();
  if (s.stats.grad_accum.size() != n || s.stats.count.size() != n || s.adam_opacity.m.size() != n ||
      s.medium_grad_sum.size() != 9)
    throw DataError(r.source + ": state does not match cloud.bin");
  return s;
}

}  // namespace uwsplat
