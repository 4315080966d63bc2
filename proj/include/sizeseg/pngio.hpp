#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sizeseg/image.hpp"

namespace sizeseg {

/// Raw 8-bit raster as stored in a PNG. For palette images `pixels` holds the
/// palette indices (one byte per pixel) and `channels` is 1.
struct PngRaster {
  int width = 0;
  int height = 0;
  int channels = 0;
  bool paletted = false;
  std::vector<std::uint8_t> pixels;
};

PngRaster read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const PngRaster& raster,
               const std::vector<std::array<std::uint8_t, 3>>& palette = {});

/// 8-bit RGB (or gray) with values rounded from [0, 1].
void write_image_png(const std::filesystem::path& path, const Image& image);
Image read_image_png(const std::filesystem::path& path);

/// Indexed-color PNG whose palette indices are the class ids.
void write_mask_png(const std::filesystem::path& path, const LabelMap& mask);
LabelMap read_mask_png(const std::filesystem::path& path);

std::string read_file_bytes(const std::filesystem::path& path);

}  // namespace sizeseg
