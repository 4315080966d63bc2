#include "sizeseg/synthdata.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <deque>
#include <numbers>

#include "sizeseg/errors.hpp"
#include "sizeseg/rng.hpp"

namespace sizeseg {

namespace {

constexpr std::array<std::array<double, 3>, kPaletteSize> kPalette = {{
    {0.85, 0.20, 0.20},
    {0.20, 0.75, 0.25},
    {0.20, 0.35, 0.90},
    {0.90, 0.85, 0.20},
    {0.80, 0.25, 0.80},
    {0.20, 0.80, 0.85},
    {0.95, 0.55, 0.15},
    {0.50, 0.25, 0.70},
}};

enum class ShapeKind { Ellipse, Rectangle, Triangle };

struct Shape {
  ShapeKind kind;
  double cy, cx, a, b, angle;
};

// Interior depth in [0, 1] (0 on the boundary, 1 at the center), or < 0 outside.
double shape_depth(const Shape& s, double y, double x) {
  const double dy = y - s.cy, dx = x - s.cx;
  const double c = std::cos(s.angle), sn = std::sin(s.angle);
  const double u = (c * dx + sn * dy) / s.a;
  const double v = (-sn * dx + c * dy) / s.b;
  switch (s.kind) {
    case ShapeKind::Ellipse:
      return 1.0 - std::sqrt(u * u + v * v);
    case ShapeKind::Rectangle:
      return std::min(1.0 - std::abs(u), 1.0 - std::abs(v));
    case ShapeKind::Triangle: {
      // Equilateral triangle inscribed in the unit circle of (u, v).
      constexpr double third = 2.0 * std::numbers::pi / 3.0;
      double lo = 1e300;
      for (int i = 0; i < 3; ++i) {
        // Distance to edge i relative to the inradius 1/2: 1 at center, 0 on the edge.
        const double nx = std::cos(i * third + std::numbers::pi / 3.0);
        const double ny = std::sin(i * third + std::numbers::pi / 3.0);
        lo = std::min(lo, 1.0 - 2.0 * (u * nx + v * ny));
      }
      return lo;
    }
  }
  return -1.0;
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

void fill_background(Image& img, Rng& rng, double level_lo, double level_hi, double tint, double noise) {
  const double level = rng.uniform(level_lo, level_hi);
  std::array<double, 3> offset{};
  for (auto& o : offset) o = rng.normal(0.0, tint);
  struct Wave {
    double fy, fx, phase, amp;
  };
  std::array<Wave, 2> waves{};
  for (auto& w : waves) {
    const double freq = rng.uniform(0.05, 0.2);
    const double dir = rng.uniform(0.0, 2.0 * std::numbers::pi);
    w = {freq * std::sin(dir), freq * std::cos(dir), rng.uniform(0.0, 2.0 * std::numbers::pi), rng.uniform(0.02, 0.07)};
  }
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      double base = level;
      for (const auto& w : waves) base += w.amp * std::sin(w.fy * y + w.fx * x + w.phase);
      for (int c = 0; c < img.channels; ++c)
        img.at(y, x, c) = clamp01(base + (img.channels == 3 ? offset[c] : 0.0) + rng.normal(0.0, noise));
    }
}

void render_shapes(const GenConfig& cfg, Rng& rng, Image& img, LabelMap& mask) {
  fill_background(img, rng, 0.3, 0.55, 0.03, cfg.texture_noise);
  const double side = std::min(cfg.height, cfg.width);
  const int count = rng.uniform_int(cfg.min_shapes, cfg.max_shapes);
  for (int i = 0; i < count; ++i) {
    const int cls = rng.uniform_int(1, cfg.classes - 1);
    Shape s;
    s.kind = static_cast<ShapeKind>(rng.uniform_int(0, 2));
    s.cy = rng.uniform(0.15, 0.85) * cfg.height;
    s.cx = rng.uniform(0.15, 0.85) * cfg.width;
    s.a = rng.uniform(cfg.min_extent, cfg.max_extent) * side;
    s.b = s.kind == ShapeKind::Triangle ? s.a : rng.uniform(cfg.min_extent, cfg.max_extent) * side;
    s.angle = rng.uniform(0.0, std::numbers::pi);
    std::array<double, 3> color = kPalette[cls - 1];
    for (auto& c : color) c = clamp01(c + rng.normal(0.0, cfg.color_noise));
    for (int y = 0; y < cfg.height; ++y)
      for (int x = 0; x < cfg.width; ++x) {
        const double t = shape_depth(s, y + 0.5, x + 0.5);
        if (t < 0.0) continue;
        const double shade = 1.0 - cfg.rim_shading * (1.0 - std::min(1.0, 2.0 * t));
        mask.at(y, x) = std::uint8_t(cls);
        for (int c = 0; c < 3; ++c) img.at(y, x, c) = clamp01(color[c] * shade + rng.normal(0.0, cfg.texture_noise));
      }
  }
}

void render_medical(const GenConfig& cfg, Rng& rng, Image& img, LabelMap& mask) {
  fill_background(img, rng, cfg.tissue_level - 0.04, cfg.tissue_level + 0.04, 0.0, cfg.texture_noise);
  const double area = double(cfg.height) * cfg.width;
  double frac = cfg.mean_object_fraction * (1.0 + cfg.size_variability * rng.normal());
  frac = std::clamp(frac, 0.3 * cfg.mean_object_fraction, 2.0 * cfg.mean_object_fraction);
  const double aspect = std::exp(rng.uniform(std::log(0.8), std::log(1.25)));
  const double r2 = frac * area / std::numbers::pi;
  Shape blob{ShapeKind::Ellipse, 0, 0, std::sqrt(r2 * aspect), std::sqrt(r2 / aspect), rng.uniform(0.0, std::numbers::pi)};
  const double margin = 1.4 * std::max(blob.a, blob.b);
  blob.cy = rng.uniform(std::min(margin, cfg.height / 2.0), std::max(cfg.height - margin, cfg.height / 2.0));
  blob.cx = rng.uniform(std::min(margin, cfg.width / 2.0), std::max(cfg.width - margin, cfg.width / 2.0));
  const bool present = rng.uniform() >= cfg.absent_probability;
  // A dimmer wall surrounds the cavity whether or not the cavity is visible.
  Shape wall = blob;
  wall.a *= 1.35;
  wall.b *= 1.35;
  const double wall_level = rng.uniform(cfg.tissue_level, cfg.tissue_level + 0.08);
  const double blob_level = rng.uniform(0.75, 0.85);
  for (int y = 0; y < cfg.height; ++y)
    for (int x = 0; x < cfg.width; ++x) {
      const double yy = y + 0.5, xx = x + 0.5;
      double level = -1.0;
      if (shape_depth(wall, yy, xx) >= 0.0) level = wall_level;
      const double t = shape_depth(blob, yy, xx);
      if (present && t >= 0.0) {
        // The cavity fades into the wall at its boundary.
        const double shade = std::min(1.0, t / cfg.medical_edge);
        level = wall_level + (blob_level - wall_level) * shade;
        mask.at(y, x) = 1;
      }
      if (level < 0.0) continue;
      const double v = clamp01(level + rng.normal(0.0, cfg.texture_noise));
      for (int c = 0; c < img.channels; ++c) img.at(y, x, c) = v;
    }
}

// Connected components (4-neighborhood) of equal labels; returns component id per pixel.
std::vector<int> label_components(const LabelMap& mask, int& count) {
  std::vector<int> comp(mask.pixels(), -1);
  count = 0;
  std::deque<std::size_t> queue;
  for (std::size_t start = 0; start < mask.pixels(); ++start) {
    if (comp[start] >= 0) continue;
    comp[start] = count;
    queue.push_back(start);
    while (!queue.empty()) {
      const std::size_t p = queue.front();
      queue.pop_front();
      const int y = int(p / mask.width), x = int(p % mask.width);
      const int ny[4] = {y - 1, y + 1, y, y};
      const int nx[4] = {x, x, x - 1, x + 1};
      for (int i = 0; i < 4; ++i) {
        if (ny[i] < 0 || ny[i] >= mask.height || nx[i] < 0 || nx[i] >= mask.width) continue;
        const std::size_t q = std::size_t(ny[i]) * mask.width + nx[i];
        if (comp[q] < 0 && mask.labels[q] == mask.labels[p]) {
          comp[q] = count;
          queue.push_back(q);
        }
      }
    }
    ++count;
  }
  return comp;
}

// Zhang-Suen thinning of a binary region (in place).
void thin(std::vector<std::uint8_t>& img, int height, int width) {
  auto at = [&](int y, int x) -> int {
    if (y < 0 || y >= height || x < 0 || x >= width) return 0;
    return img[std::size_t(y) * width + x];
  };
  bool changed = true;
  std::vector<std::size_t> remove;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      remove.clear();
      for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
          if (!at(y, x)) continue;
          const int p2 = at(y - 1, x), p3 = at(y - 1, x + 1), p4 = at(y, x + 1), p5 = at(y + 1, x + 1);
          const int p6 = at(y + 1, x), p7 = at(y + 1, x - 1), p8 = at(y, x - 1), p9 = at(y - 1, x - 1);
          const int b = p2 + p3 + p4 + p5 + p6 + p7 + p8 + p9;
          if (b < 2 || b > 6) continue;
          const int seq[9] = {p2, p3, p4, p5, p6, p7, p8, p9, p2};
          int a = 0;
          for (int i = 0; i < 8; ++i) a += (seq[i] == 0 && seq[i + 1] == 1);
          if (a != 1) continue;
          if (pass == 0 && (p2 * p4 * p6 != 0 || p4 * p6 * p8 != 0)) continue;
          if (pass == 1 && (p2 * p4 * p8 != 0 || p2 * p6 * p8 != 0)) continue;
          remove.push_back(std::size_t(y) * width + x);
        }
      for (auto p : remove) img[p] = 0;
      changed = changed || !remove.empty();
    }
  }
}

// City-block distance from each region pixel to the nearest pixel outside the region
// (the image border counts as outside).
std::vector<int> interior_distance(const std::vector<std::uint8_t>& region, int height, int width) {
  const int big = height + width + 2;
  std::vector<int> d(region.size());
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const std::size_t p = std::size_t(y) * width + x;
      if (!region[p]) {
        d[p] = 0;
        continue;
      }
      int best = std::min({y + 1, x + 1, big});
      if (y > 0) best = std::min(best, d[p - width] + 1);
      if (x > 0) best = std::min(best, d[p - 1] + 1);
      d[p] = best;
    }
  for (int y = height - 1; y >= 0; --y)
    for (int x = width - 1; x >= 0; --x) {
      const std::size_t p = std::size_t(y) * width + x;
      if (!region[p]) continue;
      int best = std::min({d[p], height - y, width - x});
      if (y + 1 < height) best = std::min(best, d[p + width] + 1);
      if (x + 1 < width) best = std::min(best, d[p + 1] + 1);
      d[p] = best;
    }
  return d;
}

void stroke_region(const LabelMap& mask, const std::vector<std::uint8_t>& region, int label, const ScribbleConfig& cfg,
                   Rng& rng, std::vector<int>& seed_label) {
  const int H = mask.height, W = mask.width;
  const auto dist = interior_distance(region, H, W);
  std::vector<std::uint8_t> skel = region;
  thin(skel, H, W);

  // Most interior pixel, preferring skeleton pixels; ties broken by the scribble stream.
  auto pick_center = [&](bool skeleton_only) -> std::ptrdiff_t {
    int best = 0;
    std::vector<std::size_t> ties;
    for (std::size_t p = 0; p < region.size(); ++p) {
      if (!region[p] || (skeleton_only && !skel[p])) continue;
      if (dist[p] > best) {
        best = dist[p];
        ties.clear();
      }
      if (dist[p] == best) ties.push_back(p);
    }
    if (ties.empty()) return -1;
    return std::ptrdiff_t(ties[std::size_t(rng.uniform_int(0, int(ties.size()) - 1))]);
  };

  std::ptrdiff_t center = pick_center(true);
  const bool has_skeleton = center >= 0;
  if (!has_skeleton) center = pick_center(false);
  if (center < 0) return;

  std::vector<std::size_t> stroke{std::size_t(center)};
  if (has_skeleton && cfg.length_ratio > 0.0) {
    std::size_t skeleton_len = 0;
    for (auto v : skel) skeleton_len += v;
    const auto target = std::max<std::size_t>(1, std::size_t(std::lround(cfg.length_ratio * double(skeleton_len))));
    std::vector<std::uint8_t> seen(region.size(), 0);
    std::deque<std::size_t> queue{std::size_t(center)};
    seen[std::size_t(center)] = 1;
    stroke.clear();
    while (!queue.empty() && stroke.size() < target) {
      const std::size_t p = queue.front();
      queue.pop_front();
      stroke.push_back(p);
      const int y = int(p / W), x = int(p % W);
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int ny = y + dy, nx = x + dx;
          if ((dy == 0 && dx == 0) || ny < 0 || ny >= H || nx < 0 || nx >= W) continue;
          const std::size_t q = std::size_t(ny) * W + nx;
          if (skel[q] && !seen[q]) {
            seen[q] = 1;
            queue.push_back(q);
          }
        }
    }
  }

  const int r = std::max(0, (cfg.stroke_width - 1) / 2);
  for (auto p : stroke) {
    const int y = int(p / W), x = int(p % W);
    for (int dy = -r; dy <= r; ++dy)
      for (int dx = -r; dx <= r; ++dx) {
        const int ny = y + dy, nx = x + dx;
        if (ny < 0 || ny >= H || nx < 0 || nx >= W) continue;
        const std::size_t q = std::size_t(ny) * W + nx;
        if (region[q]) seed_label[q] = label;
      }
  }
}

}  // namespace

std::string to_string(GenMode m) { return m == GenMode::Shapes ? "shapes" : "medical-like"; }

GenMode gen_mode_from_string(const std::string& s) {
  if (s == "shapes") return GenMode::Shapes;
  if (s == "medical-like" || s == "medical") return GenMode::MedicalLike;
  throw ConfigError("unknown generator mode '" + s + "' (expected shapes or medical-like)");
}

void validate(const GenConfig& cfg) {
  if (cfg.classes < 2) throw ConfigError("generator: need background plus at least one object class");
  if (cfg.mode == GenMode::Shapes && cfg.classes > kPaletteSize + 1)
    throw ConfigError("generator: shapes mode supports at most " + std::to_string(kPaletteSize + 1) + " classes");
  if (cfg.mode == GenMode::MedicalLike && cfg.classes != 2) throw ConfigError("generator: medical-like mode is binary");
  if (cfg.height < 4 || cfg.width < 4) throw ConfigError("generator: image must be at least 4 x 4");
  if (cfg.min_shapes < 0 || cfg.max_shapes < cfg.min_shapes) throw ConfigError("generator: bad shape count range");
  if (!(cfg.min_extent > 0.0 && cfg.max_extent >= cfg.min_extent)) throw ConfigError("generator: bad extent range");
  if (!(cfg.rim_shading >= 0.0 && cfg.rim_shading <= 1.0)) throw ConfigError("generator: rim_shading must lie in [0, 1]");
  if (!(cfg.size_variability >= 0.0)) throw ConfigError("generator: size_variability must be >= 0");
  if (!(cfg.mean_object_fraction > 0.0 && cfg.mean_object_fraction < 0.5))
    throw ConfigError("generator: mean_object_fraction must lie in (0, 0.5)");
  if (!(cfg.absent_probability >= 0.0 && cfg.absent_probability < 1.0))
    throw ConfigError("generator: absent_probability must lie in [0, 1)");
  if (!(cfg.medical_edge > 0.0 && cfg.medical_edge <= 1.0)) throw ConfigError("generator: medical_edge must lie in (0, 1]");
}

SampleRecord generate_one(const GenConfig& cfg, int index) {
  validate(cfg);
  Rng rng = Rng(cfg.seed).split(std::uint64_t(index));
  SampleRecord s;
  char id[32];
  std::snprintf(id, sizeof id, "img_%05d", index);
  s.id = id;
  s.image = Image(cfg.height, cfg.width, 3);
  s.mask = LabelMap(cfg.height, cfg.width, 0);
  if (cfg.mode == GenMode::Shapes)
    render_shapes(cfg, rng, s.image, s.mask);
  else
    render_medical(cfg, rng, s.image, s.mask);
  s.exact_sizes = sizes_from_mask(s.mask, cfg.classes);
  s.tags = tags_from_sizes(s.exact_sizes);
  return s;
}

std::vector<SampleRecord> generate(const GenConfig& cfg, int n) {
  if (n < 1) throw DomainError("generate: n must be >= 1");
  validate(cfg);
  std::vector<SampleRecord> out;
  out.reserve(std::size_t(n));
  for (int i = 0; i < n; ++i) out.push_back(generate_one(cfg, i));
  return out;
}

CategoricalDist sizes_from_mask(const LabelMap& mask, int classes) {
  if (mask.pixels() == 0) throw DomainError("sizes_from_mask: empty mask");
  std::vector<std::size_t> counts(std::size_t(classes), 0);
  for (auto l : mask.labels) {
    if (l >= classes) throw DomainError("sizes_from_mask: label out of range");
    ++counts[l];
  }
  std::vector<double> sizes(static_cast<std::size_t>(classes), 0.0);
  for (int k = 0; k < classes; ++k) sizes[k] = double(counts[k]) / double(mask.pixels());
  return CategoricalDist::normalized(std::move(sizes));
}

TagSet tags_from_sizes(const CategoricalDist& sizes) {
  TagSet tags;
  for (std::size_t k = 0; k < sizes.size(); ++k)
    if (sizes[k] > 0.0) tags.push_back(int(k));
  return tags;
}

SeedSet generate_scribbles(const LabelMap& mask, int classes, const ScribbleConfig& cfg) {
  if (mask.pixels() == 0) throw DomainError("generate_scribbles: empty mask");
  if (!(cfg.length_ratio >= 0.0 && cfg.length_ratio <= 1.0))
    throw ConfigError("generate_scribbles: length_ratio must lie in [0, 1]");
  if (cfg.stroke_width < 1) throw ConfigError("generate_scribbles: stroke_width must be >= 1");
  for (auto l : mask.labels)
    if (l >= classes) throw DomainError("generate_scribbles: label out of range");

  Rng rng(cfg.seed);
  int count = 0;
  const auto comp = label_components(mask, count);
  std::vector<std::size_t> comp_size(std::size_t(count), 0);
  std::vector<int> comp_label(std::size_t(count), 0);
  for (std::size_t p = 0; p < comp.size(); ++p) {
    ++comp_size[comp[p]];
    comp_label[comp[p]] = mask.labels[p];
  }
  int largest_bg = -1;
  for (int c = 0; c < count; ++c)
    if (comp_label[c] == 0 && (largest_bg < 0 || comp_size[c] > comp_size[largest_bg])) largest_bg = c;

  std::vector<int> seed_label(mask.pixels(), -1);
  std::vector<std::uint8_t> region(mask.pixels());
  for (int c = 0; c < count; ++c) {
    if (comp_label[c] == 0 && c != largest_bg) continue;
    for (std::size_t p = 0; p < comp.size(); ++p) region[p] = comp[p] == c;
    stroke_region(mask, region, comp_label[c], cfg, rng, seed_label);
  }

  SeedSet seeds;
  for (std::size_t p = 0; p < seed_label.size(); ++p)
    if (seed_label[p] >= 0) seeds.push_back({std::uint32_t(p), seed_label[p]});
  return seeds;
}

CategoricalDist dataset_mean_sizes(std::span<const SampleRecord> dataset) {
  if (dataset.empty()) throw DomainError("dataset_mean_sizes: empty dataset");
  std::vector<double> mean(dataset.front().exact_sizes.size(), 0.0);
  for (const auto& s : dataset) {
    if (s.exact_sizes.size() != mean.size()) throw DomainError("dataset_mean_sizes: class count mismatch");
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += s.exact_sizes[k];
  }
  for (double& m : mean) m /= double(dataset.size());
  return CategoricalDist::normalized(std::move(mean));
}

}  // namespace sizeseg
