#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "sizeseg/errors.hpp"

namespace sizeseg {

// Interleaved H x W x C raster with channel values in [0, 1].
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;

  Image() = default;
  Image(int h, int w, int c) : height(h), width(w), channels(c), data(std::size_t(h) * w * c, 0.0) {
    if (h <= 0 || w <= 0 || c <= 0) throw DomainError("Image: dimensions must be positive");
  }

  std::size_t pixels() const { return std::size_t(height) * width; }
  bool empty() const { return pixels() == 0 || channels == 0; }

  double& at(int y, int x, int c) { return data[(std::size_t(y) * width + x) * channels + c]; }
  double at(int y, int x, int c) const { return data[(std::size_t(y) * width + x) * channels + c]; }
};

// H x W map of class ids.
struct LabelMap {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> labels;

  LabelMap() = default;
  LabelMap(int h, int w, std::uint8_t fill = 0) : height(h), width(w), labels(std::size_t(h) * w, fill) {}

  std::size_t pixels() const { return labels.size(); }
  std::uint8_t& at(int y, int x) { return labels[std::size_t(y) * width + x]; }
  std::uint8_t at(int y, int x) const { return labels[std::size_t(y) * width + x]; }
};

}  // namespace sizeseg
