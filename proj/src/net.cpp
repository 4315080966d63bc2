#include "sizeseg/net.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sizeseg/binary_io.hpp"
#include "sizeseg/errors.hpp"
#include "sizeseg/rng.hpp"

namespace sizeseg {

namespace {

constexpr char kCheckpointMagic[4] = {'S', 'Z', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;

using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using MatrixMap = Eigen::Map<RowMatrix>;

RowMatrix input_matrix(const ModelConfig& cfg, const Image& image) {
  if (image.empty()) throw DomainError("forward: empty image");
  if (image.channels != cfg.in_channels) throw DomainError("forward: image channels do not match model config");
  if (cfg.architecture == Architecture::PixelLinear) {
    const Image feats = pixel_features(image);
    return ConstMatrixMap(feats.data.data(), Eigen::Index(feats.pixels()), feats.channels);
  }
  RowMatrix x = ConstMatrixMap(image.data.data(), Eigen::Index(image.pixels()), image.channels);
  x.array() -= 0.5;
  return x;
}

// N x (k*k*C) patches with zero padding; tap t = (dy + r) * k + (dx + r).
RowMatrix im2col(const RowMatrix& in, int height, int width, int kernel) {
  const int C = int(in.cols());
  if (kernel == 1) return in;
  const int r = kernel / 2;
  RowMatrix col = RowMatrix::Zero(in.rows(), Eigen::Index(kernel) * kernel * C);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const Eigen::Index p = Eigen::Index(y) * width + x;
      double* dst = col.row(p).data();
      for (int dy = -r; dy <= r; ++dy) {
        const int ny = y + dy;
        if (ny < 0 || ny >= height) continue;
        for (int dx = -r; dx <= r; ++dx) {
          const int nx = x + dx;
          if (nx < 0 || nx >= width) continue;
          const int t = (dy + r) * kernel + (dx + r);
          const double* src = in.row(Eigen::Index(ny) * width + nx).data();
          std::memcpy(dst + std::size_t(t) * C, src, sizeof(double) * C);
        }
      }
    }
  return col;
}

// Adjoint of im2col: scatter-add patch gradients back onto the input grid.
RowMatrix col2im(const RowMatrix& col, int height, int width, int kernel, int channels) {
  if (kernel == 1) return col;
  const int r = kernel / 2;
  RowMatrix out = RowMatrix::Zero(Eigen::Index(height) * width, channels);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double* src = col.row(Eigen::Index(y) * width + x).data();
      for (int dy = -r; dy <= r; ++dy) {
        const int ny = y + dy;
        if (ny < 0 || ny >= height) continue;
        for (int dx = -r; dx <= r; ++dx) {
          const int nx = x + dx;
          if (nx < 0 || nx >= width) continue;
          const int t = (dy + r) * kernel + (dx + r);
          double* dst = out.row(Eigen::Index(ny) * width + nx).data();
          const double* s = src + std::size_t(t) * channels;
          for (int c = 0; c < channels; ++c) dst[c] += s[c];
        }
      }
    }
  return out;
}

void check_params(const ModelConfig& cfg, const ModelParams& params) {
  if (params.layers != layer_table(cfg)) throw DomainError("model params do not match config");
  const auto& last = params.layers.back();
  if (params.values.size() != last.bias_offset + std::size_t(last.out))
    throw DomainError("model params have the wrong length");
}

}  // namespace

std::string to_string(Architecture a) { return a == Architecture::PixelLinear ? "pixel-linear" : "small-conv"; }

Architecture architecture_from_string(const std::string& s) {
  if (s == "pixel-linear") return Architecture::PixelLinear;
  if (s == "small-conv") return Architecture::SmallConv;
  throw ConfigError("unknown architecture '" + s + "' (expected pixel-linear or small-conv)");
}

void validate(const ModelConfig& cfg) {
  if (cfg.classes < 1) throw ConfigError("model: classes must be >= 1");
  if (cfg.in_channels < 1) throw ConfigError("model: in_channels must be >= 1");
  if (cfg.kernel < 1 || cfg.kernel % 2 == 0) throw ConfigError("model: kernel size must be odd and positive");
  for (int h : cfg.hidden)
    if (h < 1) throw ConfigError("model: hidden channel counts must be positive");
}

int input_width(const ModelConfig& cfg) {
  return cfg.architecture == Architecture::PixelLinear ? 3 * cfg.in_channels + 2 : cfg.in_channels;
}

std::vector<LayerShape> layer_table(const ModelConfig& cfg) {
  validate(cfg);
  std::vector<LayerShape> layers;
  int in = input_width(cfg);
  if (cfg.architecture == Architecture::SmallConv) {
    for (int h : cfg.hidden) {
      layers.push_back({in, h, cfg.kernel, true, 0, 0});
      in = h;
    }
  }
  layers.push_back({in, cfg.classes, 1, false, 0, 0});
  std::size_t offset = 0;
  for (auto& l : layers) {
    l.weight_offset = offset;
    offset += l.weight_count();
    l.bias_offset = offset;
    offset += std::size_t(l.out);
  }
  return layers;
}

ModelParams zero_params(const ModelConfig& cfg) {
  ModelParams p;
  p.layers = layer_table(cfg);
  const auto& last = p.layers.back();
  p.values.assign(last.bias_offset + std::size_t(last.out), 0.0);
  return p;
}

ModelParams init_params(const ModelConfig& cfg) {
  ModelParams p = zero_params(cfg);
  Rng rng(cfg.init_seed);
  for (const auto& l : p.layers) {
    const double stddev = std::sqrt(2.0 / double(l.kernel * l.kernel * l.in));
    for (std::size_t i = 0; i < l.weight_count(); ++i) p.values[l.weight_offset + i] = rng.normal(0.0, stddev);
  }
  return p;
}

Image pixel_features(const Image& image) {
  const int C = image.channels;
  Image out(image.height, image.width, 3 * C + 2);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) {
      double* f = &out.at(y, x, 0);
      for (int c = 0; c < C; ++c) f[c] = image.at(y, x, c) - 0.5;
      f[C] = image.width > 1 ? 2.0 * x / (image.width - 1) - 1.0 : 0.0;
      f[C + 1] = image.height > 1 ? 2.0 * y / (image.height - 1) - 1.0 : 0.0;
      for (int c = 0; c < C; ++c) {
        double sum = 0.0, sum2 = 0.0;
        int count = 0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int ny = y + dy, nx = x + dx;
            if (ny < 0 || ny >= image.height || nx < 0 || nx >= image.width) continue;
            const double v = image.at(ny, nx, c);
            sum += v;
            sum2 += v * v;
            ++count;
          }
        const double mean = sum / count;
        f[C + 2 + c] = mean - 0.5;
        f[2 * C + 2 + c] = std::max(0.0, sum2 / count - mean * mean);
      }
    }
  return out;
}

PredictionField forward(const ModelConfig& cfg, const ModelParams& params, const Image& image, ForwardCache& cache) {
  check_params(cfg, params);
  cache.height = image.height;
  cache.width = image.width;
  cache.columns.clear();
  cache.preact.clear();
  RowMatrix act = input_matrix(cfg, image);
  for (const auto& l : params.layers) {
    cache.columns.push_back(im2col(act, image.height, image.width, l.kernel));
    const ConstMatrixMap w(params.values.data() + l.weight_offset, Eigen::Index(l.kernel) * l.kernel * l.in, l.out);
    const Eigen::Map<const Eigen::RowVectorXd> b(params.values.data() + l.bias_offset, l.out);
    RowMatrix z = cache.columns.back() * w;
    z.rowwise() += b;
    cache.preact.push_back(z);
    act = l.relu ? RowMatrix(z.cwiseMax(0.0)) : z;
  }
  std::vector<double> logits(act.data(), act.data() + act.size());
  return PredictionField(image.height, image.width, cfg.classes, std::move(logits));
}

PredictionField forward(const ModelConfig& cfg, const ModelParams& params, const Image& image) {
  ForwardCache cache;
  return forward(cfg, params, image, cache);
}

std::vector<double> backward(const ModelConfig& cfg, const ModelParams& params, const ForwardCache& cache,
                             std::span<const double> logit_grad) {
  check_params(cfg, params);
  const Eigen::Index n = Eigen::Index(cache.height) * cache.width;
  if (cache.columns.size() != params.layers.size()) throw DomainError("backward: cache does not match model");
  if (logit_grad.size() != std::size_t(n) * cfg.classes) throw DomainError("backward: logit gradient shape mismatch");

  std::vector<double> grad(params.values.size(), 0.0);
  RowMatrix dz = ConstMatrixMap(logit_grad.data(), n, cfg.classes);
  for (std::size_t li = params.layers.size(); li-- > 0;) {
    const auto& l = params.layers[li];
    const auto& col = cache.columns[li];
    MatrixMap dw(grad.data() + l.weight_offset, Eigen::Index(l.kernel) * l.kernel * l.in, l.out);
    dw.noalias() = col.transpose() * dz;
    Eigen::Map<Eigen::RowVectorXd>(grad.data() + l.bias_offset, l.out) = dz.colwise().sum();
    if (li == 0) break;
    const ConstMatrixMap w(params.values.data() + l.weight_offset, dw.rows(), l.out);
    const RowMatrix dcol = dz * w.transpose();
    RowMatrix din = col2im(dcol, cache.height, cache.width, l.kernel, l.in);
    const auto& prev = params.layers[li - 1];
    if (prev.relu) din.array() *= (cache.preact[li - 1].array() > 0.0).cast<double>();
    dz = std::move(din);
  }
  return grad;
}

std::vector<double> backward(const ModelConfig& cfg, const ModelParams& params, const Image& image,
                             std::span<const double> logit_grad) {
  ForwardCache cache;
  forward(cfg, params, image, cache);
  return backward(cfg, params, cache, logit_grad);
}

std::string config_to_json(const ModelConfig& cfg) {
  nlohmann::json j;
  j["architecture"] = to_string(cfg.architecture);
  j["in_channels"] = cfg.in_channels;
  j["hidden"] = cfg.hidden;
  j["kernel"] = cfg.kernel;
  j["classes"] = cfg.classes;
  j["init_seed"] = cfg.init_seed;
  return j.dump();
}

ModelConfig config_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    ModelConfig cfg;
    cfg.architecture = architecture_from_string(j.value("architecture", std::string("small-conv")));
    cfg.in_channels = j.value("in_channels", cfg.in_channels);
    cfg.hidden = j.value("hidden", cfg.hidden);
    cfg.kernel = j.value("kernel", cfg.kernel);
    cfg.classes = j.value("classes", cfg.classes);
    cfg.init_seed = j.value("init_seed", cfg.init_seed);
    validate(cfg);
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
}

std::string checkpoint_bytes(const ModelConfig& cfg, const ModelParams& params) {
  check_params(cfg, params);
  std::ostringstream os(std::ios::binary);
  const std::string conf = config_to_json(cfg);
  os.write(kCheckpointMagic, 4);
  detail::write_le<std::uint32_t>(os, kCheckpointVersion);
  detail::write_le<std::uint32_t>(os, std::uint32_t(conf.size()));
  os.write(conf.data(), std::streamsize(conf.size()));
  detail::write_le<std::uint64_t>(os, params.values.size());
  for (double v : params.values) detail::write_le(os, v);
  return os.str();
}

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg, const ModelParams& params) {
  const std::string bytes = checkpoint_bytes(cfg, params);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw RuntimeFailure("cannot open " + path.string() + " for writing");
  os.write(bytes.data(), std::streamsize(bytes.size()));
  if (!os) throw RuntimeFailure("write failed: " + path.string());
}

std::pair<ModelConfig, ModelParams> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw RuntimeFailure("cannot open checkpoint " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw RuntimeFailure("not a checkpoint: " + path.string());
  if (detail::read_le<std::uint32_t>(is) != kCheckpointVersion) throw RuntimeFailure("unsupported checkpoint version");
  const auto len = detail::read_le<std::uint32_t>(is);
  std::string conf(len, '\0');
  if (!is.read(conf.data(), len)) throw RuntimeFailure("truncated checkpoint");
  ModelConfig cfg = config_from_json(conf);
  ModelParams params = zero_params(cfg);
  const auto count = detail::read_le<std::uint64_t>(is);
  if (count != params.values.size()) throw RuntimeFailure("checkpoint parameter count does not match its config");
  for (auto& v : params.values) v = detail::read_le<double>(is);
  return {cfg, params};
}

}  // namespace sizeseg
