#include "sizeseg/pngio.hpp"

#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <memory>

#include "sizeseg/errors.hpp"

namespace sizeseg {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

const std::vector<std::array<std::uint8_t, 3>>& class_palette() {
  static const std::vector<std::array<std::uint8_t, 3>> palette = [] {
    std::vector<std::array<std::uint8_t, 3>> p = {
        {0, 0, 0},       {217, 51, 51},  {51, 191, 64},  {51, 89, 230},  {230, 217, 51},
        {204, 64, 204},  {51, 204, 217}, {242, 140, 38}, {128, 64, 179},
    };
    while (p.size() < 256) {
      const auto i = std::uint8_t(p.size());
      p.push_back({std::uint8_t(i * 37), std::uint8_t(i * 91), std::uint8_t(i * 53)});
    }
    return p;
  }();
  return palette;
}

}  // namespace

PngRaster read_png(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) throw RuntimeFailure("cannot open " + path.string());
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw RuntimeFailure("not a PNG file: " + path.string());

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw RuntimeFailure("libpng initialization failed");
  }
  PngRaster out;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw RuntimeFailure("corrupt PNG: " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const auto color_type = png_get_color_type(png, info);
  const auto bit_depth = png_get_bit_depth(png, info);
  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) {
    if (bit_depth < 8) png_set_packing(png);
    out.paletted = true;
  } else {
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  }
  png_read_update_info(png, info);
  out.width = int(png_get_image_width(png, info));
  out.height = int(png_get_image_height(png, info));
  out.channels = int(png_get_channels(png, info));
  const auto rowbytes = png_get_rowbytes(png, info);
  out.pixels.resize(rowbytes * std::size_t(out.height));
  rows.resize(std::size_t(out.height));
  for (int y = 0; y < out.height; ++y) rows[y] = out.pixels.data() + rowbytes * std::size_t(y);
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

void write_png(const std::filesystem::path& path, const PngRaster& raster,
               const std::vector<std::array<std::uint8_t, 3>>& palette) {
  if (raster.channels != 1 && raster.channels != 3) throw DomainError("write_png: channels must be 1 or 3");
  if (raster.pixels.size() != std::size_t(raster.width) * raster.height * raster.channels)
    throw DomainError("write_png: pixel buffer size mismatch");
  FilePtr fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) throw RuntimeFailure("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw RuntimeFailure("libpng initialization failed");
  }
  std::vector<png_color> pal;
  std::vector<png_bytep> rows(std::size_t(raster.height));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw RuntimeFailure("PNG encoding failed: " + path.string());
  }
  png_init_io(png, fp.get());
  int color_type = raster.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY;
  if (raster.paletted) {
    color_type = PNG_COLOR_TYPE_PALETTE;
    for (const auto& c : palette) pal.push_back({c[0], c[1], c[2]});
  }
  png_set_IHDR(png, info, png_uint_32(raster.width), png_uint_32(raster.height), 8, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  if (raster.paletted) png_set_PLTE(png, info, pal.data(), int(pal.size()));
  png_write_info(png, info);
  const std::size_t stride = std::size_t(raster.width) * raster.channels;
  for (int y = 0; y < raster.height; ++y) rows[y] = const_cast<png_bytep>(raster.pixels.data() + stride * y);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void write_image_png(const std::filesystem::path& path, const Image& image) {
  PngRaster r;
  r.width = image.width;
  r.height = image.height;
  r.channels = image.channels;
  r.pixels.resize(image.data.size());
  for (std::size_t i = 0; i < image.data.size(); ++i)
    r.pixels[i] = std::uint8_t(std::lround(std::clamp(image.data[i], 0.0, 1.0) * 255.0));
  write_png(path, r);
}

Image read_image_png(const std::filesystem::path& path) {
  const PngRaster r = read_png(path);
  if (r.paletted) throw RuntimeFailure("expected an RGB or gray image, got a palette PNG: " + path.string());
  Image img(r.height, r.width, r.channels);
  for (std::size_t i = 0; i < r.pixels.size(); ++i) img.data[i] = r.pixels[i] / 255.0;
  return img;
}

void write_mask_png(const std::filesystem::path& path, const LabelMap& mask) {
  PngRaster r;
  r.width = mask.width;
  r.height = mask.height;
  r.channels = 1;
  r.paletted = true;
  r.pixels = mask.labels;
  std::uint8_t max_label = 0;
  for (auto l : mask.labels) max_label = std::max(max_label, l);
  const auto& full = class_palette();
  write_png(path, r, {full.begin(), full.begin() + std::max<std::size_t>(2, std::size_t(max_label) + 1)});
}

LabelMap read_mask_png(const std::filesystem::path& path) {
  const PngRaster r = read_png(path);
  if (r.channels != 1) throw RuntimeFailure("mask must be a single-channel PNG: " + path.string());
  LabelMap m(r.height, r.width);
  m.labels = r.pixels;
  return m;
}

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw RuntimeFailure("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

}  // namespace sizeseg
