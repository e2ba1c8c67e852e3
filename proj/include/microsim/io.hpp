#pragma once

// Grayscale PNG and floating-point TIFF I/O.
//
// Intensities are returned normalized to [0, 1] from the container bit depth.
// Depth maps come from 32-bit float TIFF (meters) or from 16-bit PNG plus a
// sidecar `<file>.cfg` holding `min_depth` and `max_depth` (meters) for the
// linear mapping 0 -> min_depth, 65535 -> max_depth.

#include <png.h>
#include <tiffio.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "microsim/error.hpp"
#include "microsim/image.hpp"
#include "microsim/optics.hpp"

namespace microsim::io {

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept { std::fclose(f); }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

inline File open_file(const std::string& path, const char* mode) {
  File f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open '" + path + "'");
  return f;
}

inline std::string lower_extension(const std::string& path) {
  auto ext = std::filesystem::path(path).extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext;
}

} // namespace detail

struct PngImage {
  RealImage values; // normalized to [0, 1]
  int bit_depth = 8;
};

inline PngImage read_png(const std::string& path) {
  auto file = detail::open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("libpng: cannot create read struct");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("libpng: cannot create info struct");
  }
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_read_struct(p, i, nullptr); }
  } guard{&png, &info};

  std::vector<std::uint8_t> buffer;
  std::vector<png_bytep> rows;
  png_uint_32 width = 0, height = 0;
  int bit_depth = 0;
  if (setjmp(png_jmpbuf(png))) throw IoError("'" + path + "' is not a readable PNG");

  png_init_io(png, file.get());
  png_read_info(png, info);
  width = png_get_image_width(png, info);
  height = png_get_image_height(png, info);
  bit_depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);

  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA ||
      color == PNG_COLOR_TYPE_PALETTE)
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  if (bit_depth == 16) png_set_swap(png); // host (little-endian) order
  png_read_update_info(png, info);

  const int out_depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  buffer.resize(rowbytes * height);
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = buffer.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);

  PngImage out;
  out.bit_depth = out_depth;
  out.values = RealImage(width, height);
  for (png_uint_32 y = 0; y < height; ++y)
    for (png_uint_32 x = 0; x < width; ++x) {
      if (out_depth == 16) {
        std::uint16_t v;
        std::memcpy(&v, rows[y] + 2 * x, 2);
        out.values(x, y) = v / 65535.0;
      } else {
        out.values(x, y) = rows[y][x] / 255.0;
      }
    }
  return out;
}

/// Writes a grayscale PNG; values are clamped to [0, 1] and quantized with
/// round-to-nearest.
inline void write_png(const std::string& path, const RealImage& img, int bit_depth = 8) {
  if (bit_depth != 8 && bit_depth != 16) throw InvalidArgument("write_png: bit depth 8 or 16");
  if (img.empty()) throw InvalidArgument("write_png: empty image");
  auto file = detail::open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("libpng: cannot create write struct");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_write_struct(p, i); }
  } guard{&png, &info};
  if (!info) throw IoError("libpng: cannot create info struct");

  const std::size_t bpp = bit_depth / 8;
  std::vector<std::uint8_t> buffer(img.size() * bpp);
  const double scale = bit_depth == 16 ? 65535.0 : 255.0;
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double v = std::clamp(img[i], 0.0, 1.0);
    const auto q = static_cast<std::uint32_t>(std::lround(v * scale));
    if (bit_depth == 16) {
      buffer[2 * i] = static_cast<std::uint8_t>(q >> 8); // PNG is big-endian
      buffer[2 * i + 1] = static_cast<std::uint8_t>(q & 0xff);
    } else {
      buffer[i] = static_cast<std::uint8_t>(q);
    }
  }
  std::vector<png_bytep> rows(img.height());
  for (std::size_t y = 0; y < img.height(); ++y)
    rows[y] = buffer.data() + y * img.width() * bpp;

  if (setjmp(png_jmpbuf(png))) throw IoError("failed writing PNG '" + path + "'");
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()),
               static_cast<png_uint_32>(img.height()), bit_depth, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
}

namespace detail {
struct TiffCloser {
  void operator()(TIFF* t) const noexcept { TIFFClose(t); }
};
using Tiff = std::unique_ptr<TIFF, TiffCloser>;

inline void silence_tiff_warnings() {
  static const bool once = [] {
    TIFFSetWarningHandler(nullptr);
    return true;
  }();
  (void)once;
}
} // namespace detail

/// Single-channel floating-point (32/64-bit) TIFF, values returned as-is.
inline RealImage read_tiff_float(const std::string& path) {
  detail::silence_tiff_warnings();
  detail::Tiff tif(TIFFOpen(path.c_str(), "r"));
  if (!tif) throw IoError("cannot open TIFF '" + path + "'");
  std::uint32_t w = 0, h = 0;
  std::uint16_t bps = 0, spp = 1, fmt = SAMPLEFORMAT_UINT;
  TIFFGetField(tif.get(), TIFFTAG_IMAGEWIDTH, &w);
  TIFFGetField(tif.get(), TIFFTAG_IMAGELENGTH, &h);
  TIFFGetField(tif.get(), TIFFTAG_BITSPERSAMPLE, &bps);
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_SAMPLESPERPIXEL, &spp);
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_SAMPLEFORMAT, &fmt);
  if (spp != 1 || fmt != SAMPLEFORMAT_IEEEFP || (bps != 32 && bps != 64))
    throw IoError("'" + path + "': expected a single-channel 32/64-bit float TIFF");
  if (TIFFIsTiled(tif.get())) throw IoError("'" + path + "': tiled TIFF is not supported");

  RealImage out(w, h);
  std::vector<std::uint8_t> line(static_cast<std::size_t>(TIFFScanlineSize(tif.get())));
  for (std::uint32_t y = 0; y < h; ++y) {
    if (TIFFReadScanline(tif.get(), line.data(), y) < 0)
      throw IoError("'" + path + "': failed reading row " + std::to_string(y));
    for (std::uint32_t x = 0; x < w; ++x) {
      if (bps == 32) {
        float v;
        std::memcpy(&v, line.data() + 4 * x, 4);
        out(x, y) = v;
      } else {
        double v;
        std::memcpy(&v, line.data() + 8 * x, 8);
        out(x, y) = v;
      }
    }
  }
  return out;
}

inline void write_tiff_float(const std::string& path, const RealImage& img) {
  detail::Tiff tif(TIFFOpen(path.c_str(), "w"));
  if (!tif) throw IoError("cannot create TIFF '" + path + "'");
  TIFFSetField(tif.get(), TIFFTAG_IMAGEWIDTH, static_cast<std::uint32_t>(img.width()));
  TIFFSetField(tif.get(), TIFFTAG_IMAGELENGTH, static_cast<std::uint32_t>(img.height()));
  TIFFSetField(tif.get(), TIFFTAG_SAMPLESPERPIXEL, 1);
  TIFFSetField(tif.get(), TIFFTAG_BITSPERSAMPLE, 32);
  TIFFSetField(tif.get(), TIFFTAG_SAMPLEFORMAT, SAMPLEFORMAT_IEEEFP);
  TIFFSetField(tif.get(), TIFFTAG_PHOTOMETRIC, PHOTOMETRIC_MINISBLACK);
  TIFFSetField(tif.get(), TIFFTAG_PLANARCONFIG, PLANARCONFIG_CONTIG);
  TIFFSetField(tif.get(), TIFFTAG_ROWSPERSTRIP, 1);
  std::vector<float> row(img.width());
  for (std::size_t y = 0; y < img.height(); ++y) {
    for (std::size_t x = 0; x < img.width(); ++x) row[x] = static_cast<float>(img(x, y));
    if (TIFFWriteScanline(tif.get(), row.data(), static_cast<std::uint32_t>(y), 0) < 0)
      throw IoError("failed writing TIFF '" + path + "'");
  }
}

struct DepthPngMapping {
  double min_depth = 0;
  double max_depth = 0;
};

inline DepthPngMapping read_depth_sidecar(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("missing depth sidecar '" + path + "'");
  const auto kv = microsim::detail::parse_key_values(in, path);
  DepthPngMapping m;
  bool have_min = false, have_max = false;
  for (const auto& [k, v] : kv) {
    if (k == "min_depth") {
      m.min_depth = microsim::detail::parse_double(v, path + ": min_depth");
      have_min = true;
    } else if (k == "max_depth") {
      m.max_depth = microsim::detail::parse_double(v, path + ": max_depth");
      have_max = true;
    } else {
      throw ParseError(path + ": unknown key '" + k + "'");
    }
  }
  if (!have_min || !have_max) throw ParseError(path + ": needs min_depth and max_depth");
  return m;
}

inline std::string depth_sidecar_path(const std::string& png_path) { return png_path + ".cfg"; }

/// Depth map in meters from a float TIFF or a 16-bit PNG with sidecar.
inline DepthMap load_depth(const std::string& path) {
  if (!std::filesystem::exists(path)) throw IoError("depth map '" + path + "' does not exist");
  const auto ext = detail::lower_extension(path);
  if (ext == ".tif" || ext == ".tiff") return read_tiff_float(path);
  if (ext == ".png") {
    const auto png = read_png(path);
    if (png.bit_depth != 16) throw IoError("'" + path + "': depth PNG must be 16-bit");
    const auto map = read_depth_sidecar(depth_sidecar_path(path));
    DepthMap d(png.values.width(), png.values.height());
    for (std::size_t i = 0; i < d.size(); ++i)
      d[i] = map.min_depth + png.values[i] * (map.max_depth - map.min_depth);
    return d;
  }
  throw IoError("'" + path + "': unsupported depth map format (want .tif or .png)");
}

inline RealImage load_image(const std::string& path) {
  if (!std::filesystem::exists(path)) throw IoError("image '" + path + "' does not exist");
  return read_png(path).values;
}

/// Natural ordering: digit runs compare by numeric value ("f2" < "f10").
inline bool natural_less(const std::string& a, const std::string& b) {
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const bool da = std::isdigit(static_cast<unsigned char>(a[i])) != 0;
    const bool db = std::isdigit(static_cast<unsigned char>(b[j])) != 0;
    if (da && db) {
      std::size_t ie = i, je = j;
      while (ie < a.size() && std::isdigit(static_cast<unsigned char>(a[ie]))) ++ie;
      while (je < b.size() && std::isdigit(static_cast<unsigned char>(b[je]))) ++je;
      std::size_t is = i, js = j;
      while (is + 1 < ie && a[is] == '0') ++is;
      while (js + 1 < je && b[js] == '0') ++js;
      if (ie - is != je - js) return ie - is < je - js;
      if (const int c = a.compare(is, ie - is, b, js, je - js); c != 0) return c < 0;
      if (ie - i != je - j) return ie - i < je - j; // fewer leading zeros first
      i = ie;
      j = je;
    } else {
      if (a[i] != b[j]) return static_cast<unsigned char>(a[i]) < static_cast<unsigned char>(b[j]);
      ++i;
      ++j;
    }
  }
  return a.size() - i < b.size() - j;
}

/// Regular files in `dir` with one of `extensions` (lower-case, with dot),
/// naturally sorted by filename.
inline std::vector<std::filesystem::path> list_files(const std::filesystem::path& dir,
                                                     const std::vector<std::string>& extensions) {
  if (!std::filesystem::is_directory(dir))
    throw IoError("'" + dir.string() + "' is not a directory");
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = detail::lower_extension(entry.path().string());
    if (std::find(extensions.begin(), extensions.end(), ext) != extensions.end())
      out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return natural_less(a.filename().string(), b.filename().string());
  });
  return out;
}

} // namespace microsim::io
