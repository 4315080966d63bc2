#include "sizeseg/affinity.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <utility>

#include "sizeseg/binary_io.hpp"
#include "sizeseg/errors.hpp"

namespace sizeseg {

namespace {

constexpr char kCacheMagic[4] = {'S', 'Z', 'A', 'F'};
constexpr std::uint32_t kCacheVersion = 1;

// Forward half of the neighborhood: offsets (dy, dx) with dy > 0, or dy == 0 and dx > 0.
std::vector<std::pair<int, int>> forward_offsets(const AffinityConfig& cfg) {
  switch (cfg.connectivity) {
    case Connectivity::Four:
      return {{0, 1}, {1, 0}};
    case Connectivity::Eight:
      return {{0, 1}, {1, -1}, {1, 0}, {1, 1}};
    case Connectivity::Disc: {
      std::vector<std::pair<int, int>> out;
      const int r = cfg.radius;
      for (int dy = 0; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          if (dy == 0 && dx <= 0) continue;
          if (dy * dy + dx * dx <= r * r) out.emplace_back(dy, dx);
        }
      return out;
    }
  }
  return {};
}

double squared_distance(const Image& img, std::size_t p, std::size_t q) {
  double d2 = 0.0;
  for (int c = 0; c < img.channels; ++c) {
    const double d = img.data[p * img.channels + c] - img.data[q * img.channels + c];
    d2 += d * d;
  }
  return d2;
}

}  // namespace

AffinityGraph build_affinity(const Image& image, const AffinityConfig& cfg) {
  if (image.empty()) throw DomainError("build_affinity: zero-size image");
  if (image.channels != 1 && image.channels != 3) throw DomainError("build_affinity: channels must be 1 or 3");
  if (cfg.radius < 1) throw ConfigError("build_affinity: radius must be >= 1");
  if (cfg.bandwidth && !(*cfg.bandwidth > 0.0)) throw ConfigError("build_affinity: bandwidth must be > 0");

  AffinityGraph g;
  g.height = image.height;
  g.width = image.width;
  g.radius = cfg.radius;
  g.connectivity = cfg.connectivity;

  const auto offsets = forward_offsets(cfg);
  std::vector<double> d2;
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      for (auto [dy, dx] : offsets) {
        const int ny = y + dy, nx = x + dx;
        if (ny >= image.height || nx < 0 || nx >= image.width) continue;
        const auto p = std::uint32_t(y * image.width + x);
        const auto q = std::uint32_t(ny * image.width + nx);
        g.edges.push_back({p, q, 0.0});
        d2.push_back(squared_distance(image, p, q));
      }

  double sigma = 1.0;
  if (cfg.bandwidth) {
    sigma = *cfg.bandwidth;
  } else if (!d2.empty()) {
    double mean = 0.0;
    for (double v : d2) mean += std::sqrt(v);
    mean /= double(d2.size());
    if (mean > 0.0) sigma = mean;
  }
  g.bandwidth = sigma;
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (std::size_t i = 0; i < g.edges.size(); ++i) g.edges[i].weight = std::exp(-d2[i] * inv);
  return g;
}

AffinityGraph make_graph(int height, int width, std::vector<AffinityEdge> edges) {
  if (height <= 0 || width <= 0) throw DomainError("make_graph: empty pixel domain");
  const std::size_t n = std::size_t(height) * width;
  for (const auto& e : edges) {
    if (e.p >= e.q) throw ConfigError("make_graph: edges must satisfy p < q (no self-edges)");
    if (e.q >= n) throw ConfigError("make_graph: edge index out of range");
    if (!(e.weight >= 0.0) || !std::isfinite(e.weight)) throw ConfigError("make_graph: weights must be finite and >= 0");
  }
  std::vector<std::uint64_t> keys;
  keys.reserve(edges.size());
  for (const auto& e : edges) keys.push_back((std::uint64_t(e.p) << 32) | e.q);
  std::sort(keys.begin(), keys.end());
  if (std::adjacent_find(keys.begin(), keys.end()) != keys.end())
    throw ConfigError("make_graph: duplicate edge");
  AffinityGraph g;
  g.height = height;
  g.width = width;
  g.edges = std::move(edges);
  return g;
}

void apply_into(const AffinityGraph& graph, std::span<const double> x, std::span<double> y) {
  if (x.size() != graph.num_pixels() || y.size() != graph.num_pixels())
    throw DomainError("apply: vector length does not match pixel count");
  std::fill(y.begin(), y.end(), 0.0);
  for (const auto& e : graph.edges) {
    y[e.p] += e.weight * x[e.q];
    y[e.q] += e.weight * x[e.p];
  }
}

std::vector<double> apply(const AffinityGraph& graph, std::span<const double> x) {
  std::vector<double> y(graph.num_pixels());
  apply_into(graph, x, y);
  return y;
}

std::vector<double> degrees(const AffinityGraph& graph) {
  std::vector<double> d(graph.num_pixels(), 0.0);
  for (const auto& e : graph.edges) {
    d[e.p] += e.weight;
    d[e.q] += e.weight;
  }
  return d;
}

void write_affinity_cache(const AffinityGraph& graph, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw RuntimeFailure("cannot open " + path.string() + " for writing");
  os.write(kCacheMagic, 4);
  detail::write_le<std::uint32_t>(os, kCacheVersion);
  detail::write_le<std::uint32_t>(os, std::uint32_t(graph.height));
  detail::write_le<std::uint32_t>(os, std::uint32_t(graph.width));
  detail::write_le<std::uint64_t>(os, graph.edges.size());
  for (const auto& e : graph.edges) {
    detail::write_le(os, e.p);
    detail::write_le(os, e.q);
    detail::write_le(os, e.weight);
  }
  if (!os) throw RuntimeFailure("write failed: " + path.string());
}

AffinityGraph read_affinity_cache(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw RuntimeFailure("cannot open " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kCacheMagic, 4) != 0)
    throw RuntimeFailure("not an affinity cache: " + path.string());
  if (detail::read_le<std::uint32_t>(is) != kCacheVersion) throw RuntimeFailure("unsupported affinity cache version");
  const int h = int(detail::read_le<std::uint32_t>(is));
  const int w = int(detail::read_le<std::uint32_t>(is));
  const auto count = detail::read_le<std::uint64_t>(is);
  std::vector<AffinityEdge> edges;
  edges.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    AffinityEdge e;
    e.p = detail::read_le<std::uint32_t>(is);
    e.q = detail::read_le<std::uint32_t>(is);
    e.weight = detail::read_le<double>(is);
    edges.push_back(e);
  }
  return make_graph(h, w, std::move(edges));
}

}  // namespace sizeseg
