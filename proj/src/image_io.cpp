#include "uwsplat/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>

#include "uwsplat/errors.hpp"

namespace uwsplat {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw DataError("cannot open " + path.string());
  return f;
}

struct PngReader {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngReader() { png_destroy_read_struct(&png, &info, nullptr); }
};

struct PngWriter {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngWriter() { png_destroy_write_struct(&png, &info); }
};

struct PngHeader {
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int bit_depth = 0;
  std::size_t rowbytes = 0;
};

// libpng reports errors by longjmp; these helpers keep only trivially
// destructible locals between setjmp and the libpng calls.
bool read_header(PngReader& r, std::FILE* f, PngHeader& out) {
  if (setjmp(png_jmpbuf(r.png))) return false;
  png_init_io(r.png, f);
  png_read_info(r.png, r.info);
  const int color_type = png_get_color_type(r.png, r.info);
  const int depth = png_get_bit_depth(r.png, r.info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(r.png);
  if (color_type == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(r.png);
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(r.png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(r.png);
  if (png_get_valid(r.png, r.info, PNG_INFO_tRNS)) png_set_strip_alpha(r.png);
  png_read_update_info(r.png, r.info);
  out.width = png_get_image_width(r.png, r.info);
  out.height = png_get_image_height(r.png, r.info);
  out.bit_depth = png_get_bit_depth(r.png, r.info);
  out.rowbytes = png_get_rowbytes(r.png, r.info);
  return true;
}

bool read_rows(PngReader& r, png_bytep* rows) {
  if (setjmp(png_jmpbuf(r.png))) return false;
  png_read_image(r.png, rows);
  png_read_end(r.png, nullptr);
  return true;
}

bool write_png(PngWriter& w, std::FILE* f, png_uint_32 width, png_uint_32 height, int bit_depth, int color_type,
               png_bytep* rows) {
  if (setjmp(png_jmpbuf(w.png))) return false;
  png_init_io(w.png, f);
  png_set_IHDR(w.png, w.info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(w.png, w.info);
  png_write_image(w.png, rows);
  png_write_end(w.png, nullptr);
  return true;
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

void write_buffer(const std::filesystem::path& path, std::vector<std::uint8_t>& buf, std::size_t width,
                  std::size_t height, int bit_depth, int color_type, std::size_t rowbytes) {
  std::vector<png_bytep> rows(height);
  for (std::size_t y = 0; y < height; ++y) rows[y] = buf.data() + y * rowbytes;
  auto f = open_file(path, "wb");
  PngWriter w;
  w.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!w.png) throw DataError("png: out of memory");
  w.info = png_create_info_struct(w.png);
  if (!w.info) throw DataError("png: out of memory");
  if (!write_png(w, f.get(), static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth, color_type,
                 rows.data())) {
    throw DataError("png: failed writing " + path.string());
  }
}

}  // namespace

RgbImage load_image(const std::filesystem::path& path) {
  auto f = open_file(path, "rb");
  unsigned char sig[8] = {};
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw DataError("not a PNG file: " + path.string());
  }
  PngReader r;
  r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!r.png) throw DataError("png: out of memory");
  r.info = png_create_info_struct(r.png);
  if (!r.info) throw DataError("png: out of memory");
  png_set_sig_bytes(r.png, 8);

  PngHeader hdr;
  if (!read_header(r, f.get(), hdr)) throw DataError("png: corrupt header in " + path.string());
  if (hdr.bit_depth != 8 && hdr.bit_depth != 16) {
    throw DataError("png: unsupported bit depth " + std::to_string(hdr.bit_depth) + " in " + path.string());
  }
  if (hdr.rowbytes != static_cast<std::size_t>(hdr.width) * 3 * (hdr.bit_depth / 8)) {
    throw DataError("png: unexpected channel layout in " + path.string());
  }
  std::vector<std::uint8_t> buf(hdr.rowbytes * hdr.height);
  std::vector<png_bytep> rows(hdr.height);
  for (std::size_t y = 0; y < hdr.height; ++y) rows[y] = buf.data() + y * hdr.rowbytes;
  if (!read_rows(r, rows.data())) throw DataError("png: corrupt image data in " + path.string());

  RgbImage img(hdr.width, hdr.height);
  auto& d = img.data();
  if (hdr.bit_depth == 8) {
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = buf[i] / 255.0;
  } else {
    for (std::size_t i = 0; i < d.size(); ++i) {
      const unsigned v = (static_cast<unsigned>(buf[2 * i]) << 8) | buf[2 * i + 1];
      d[i] = v / 65535.0;
    }
  }
  return img;
}

void save_image(const RgbImage& img, const std::filesystem::path& path, PngDepth depth) {
  if (img.empty()) throw std::invalid_argument("save_image: empty image");
  const auto& d = img.data();
  if (depth == PngDepth::k8) {
    std::vector<std::uint8_t> buf(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) buf[i] = static_cast<std::uint8_t>(std::lround(clamp01(d[i]) * 255.0));
    write_buffer(path, buf, img.width(), img.height(), 8, PNG_COLOR_TYPE_RGB, img.width() * 3);
  } else {
    std::vector<std::uint8_t> buf(d.size() * 2);
    for (std::size_t i = 0; i < d.size(); ++i) {
      const auto v = static_cast<unsigned>(std::lround(clamp01(d[i]) * 65535.0));
      buf[2 * i] = static_cast<std::uint8_t>(v >> 8);
      buf[2 * i + 1] = static_cast<std::uint8_t>(v & 0xff);
    }
    write_buffer(path, buf, img.width(), img.height(), 16, PNG_COLOR_TYPE_RGB, img.width() * 6);
  }
}

void save_gray_image(const ScalarMap& map, const std::filesystem::path& path) {
  if (map.empty()) throw std::invalid_argument("save_gray_image: empty map");
  std::vector<std::uint8_t> buf(map.pixel_count());
  for (std::size_t i = 0; i < buf.size(); ++i) {
    buf[i] = static_cast<std::uint8_t>(std::lround(clamp01(map.data()[i]) * 255.0));
  }
  write_buffer(path, buf, map.width(), map.height(), 8, PNG_COLOR_TYPE_GRAY, map.width());
}

namespace {

constexpr char kFmapMagic[4] = {'F', 'M', 'A', 'P'};
constexpr std::size_t kFmapHeader = 16;

void put_u32(std::uint8_t* p, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

ScalarMap load_scalar_map(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < kFmapHeader) throw DataError("fmap: truncated header in " + path.string());
  if (std::memcmp(bytes.data(), kFmapMagic, 4) != 0) throw DataError("fmap: bad magic in " + path.string());
  const std::uint32_t w = get_u32(bytes.data() + 4);
  const std::uint32_t h = get_u32(bytes.data() + 8);
  const std::size_t expected = kFmapHeader + static_cast<std::size_t>(w) * h * 4;
  if (bytes.size() != expected) {
    throw DataError("fmap: " + path.string() + " holds " + std::to_string(bytes.size()) + " bytes, header implies " +
                    std::to_string(expected));
  }
  std::vector<float> data(static_cast<std::size_t>(w) * h);
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = std::bit_cast<float>(get_u32(bytes.data() + kFmapHeader + 4 * i));
  }
  return ScalarMap(w, h, std::move(data));
}

void save_scalar_map(const ScalarMap& map, const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes(kFmapHeader + map.pixel_count() * 4);
  std::memcpy(bytes.data(), kFmapMagic, 4);
  put_u32(bytes.data() + 4, static_cast<std::uint32_t>(map.width()));
  put_u32(bytes.data() + 8, static_cast<std::uint32_t>(map.height()));
  put_u32(bytes.data() + 12, 0);
  for (std::size_t i = 0; i < map.pixel_count(); ++i) {
    put_u32(bytes.data() + kFmapHeader + 4 * i, std::bit_cast<std::uint32_t>(map.data()[i]));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("short write to " + path.string());
}

}  // namespace uwsplat
