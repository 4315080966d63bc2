#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sizeseg/field.hpp"
#include "sizeseg/image.hpp"

namespace sizeseg {

enum class Architecture {
  /// Softmax regression over fixed per-pixel features (color, position, local mean and variance).
  PixelLinear,
  /// Stack of size-preserving k x k convolutions with ReLU, then a 1 x 1 classifier.
  SmallConv,
};

std::string to_string(Architecture a);
Architecture architecture_from_string(const std::string& s);

struct ModelConfig {
  Architecture architecture = Architecture::SmallConv;
  int in_channels = 3;
  std::vector<int> hidden = {8, 8, 8};
  int kernel = 3;
  int classes = 2;
  std::uint64_t init_seed = 0;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct LayerShape {
  int in = 0;
  int out = 0;
  int kernel = 1;
  bool relu = false;
  std::size_t weight_offset = 0;
  std::size_t bias_offset = 0;

  std::size_t weight_count() const { return std::size_t(kernel) * kernel * in * out; }
  friend bool operator==(const LayerShape&, const LayerShape&) = default;
};

struct ModelParams {
  std::vector<double> values;
  std::vector<LayerShape> layers;
};

void validate(const ModelConfig& cfg);
/// Channels the first layer consumes (image channels, or feature count for PixelLinear).
int input_width(const ModelConfig& cfg);
std::vector<LayerShape> layer_table(const ModelConfig& cfg);
/// Kaiming-style init: weights ~ N(0, 2 / fan_in) from the seeded generator, zero biases.
ModelParams init_params(const ModelConfig& cfg);
ModelParams zero_params(const ModelConfig& cfg);

/// Fixed per-pixel features for PixelLinear: centered channels, x and y in
/// [-1, 1], and the 3 x 3 local mean and variance of each channel.
Image pixel_features(const Image& image);

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Activations kept by the forward pass for backward.
struct ForwardCache {
  int height = 0;
  int width = 0;
  /// Per layer: im2col matrix of the layer input (N x k*k*in).
  std::vector<RowMatrix> columns;
  /// Per layer: pre-activation output (N x out).
  std::vector<RowMatrix> preact;
};

PredictionField forward(const ModelConfig& cfg, const ModelParams& params, const Image& image);
PredictionField forward(const ModelConfig& cfg, const ModelParams& params, const Image& image, ForwardCache& cache);

/// Parameter gradient for the given logit gradient (pixel-major N x K).
std::vector<double> backward(const ModelConfig& cfg, const ModelParams& params, const ForwardCache& cache,
                             std::span<const double> logit_grad);
std::vector<double> backward(const ModelConfig& cfg, const ModelParams& params, const Image& image,
                             std::span<const double> logit_grad);

/// Checkpoint: "SZCK" magic, u32 version, u32 config length, config JSON,
/// u64 parameter count, little-endian f64 parameters.
void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg, const ModelParams& params);
std::pair<ModelConfig, ModelParams> load_checkpoint(const std::filesystem::path& path);
std::string checkpoint_bytes(const ModelConfig& cfg, const ModelParams& params);

std::string config_to_json(const ModelConfig& cfg);
ModelConfig config_from_json(const std::string& text);

}  // namespace sizeseg
