#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sizeseg/image.hpp"
#include "sizeseg/losses.hpp"
#include "sizeseg/simplex.hpp"

namespace sizeseg {

enum class GenMode {
  /// Colored ellipses, rectangles and triangles over a textured background.
  Shapes,
  /// Binary: one soft-edged bright blob with low area variability, or none.
  MedicalLike,
};

std::string to_string(GenMode m);
GenMode gen_mode_from_string(const std::string& s);

/// Number of distinct object appearances the shapes palette provides.
inline constexpr int kPaletteSize = 8;

struct GenConfig {
  GenMode mode = GenMode::Shapes;
  /// Background plus object classes.
  int classes = 5;
  int height = 64;
  int width = 64;
  int min_shapes = 1;
  int max_shapes = 3;
  /// Shape half-extent range as a fraction of the shorter image side.
  double min_extent = 0.12;
  double max_extent = 0.35;
  /// Std of the per-instance color offset.
  double color_noise = 0.06;
  /// Std of the per-pixel noise.
  double texture_noise = 0.04;
  /// Fraction by which object brightness falls off from center to boundary.
  double rim_shading = 0.6;
  /// Medical-like: relative std of the object area.
  double size_variability = 0.05;
  /// Medical-like: mean object area fraction.
  double mean_object_fraction = 0.15;
  /// Medical-like: probability that an image has no object.
  double absent_probability = 0.0;
  /// Medical-like: depth (fraction of the radius) over which the object
  /// brightness ramps down to the wall level.
  double medical_edge = 0.5;
  /// Medical-like: mean background brightness.
  double tissue_level = 0.42;
  std::uint64_t seed = 0;
};

struct SampleRecord {
  std::string id;
  Image image;
  LabelMap mask;
  TagSet tags;
  /// Exact sizes from the mask.
  CategoricalDist exact_sizes;
  /// Working (corrupted or annotated) targets, when assigned.
  std::optional<CategoricalDist> sizes;
  std::optional<SeedSet> seeds;
};

void validate(const GenConfig& cfg);

/// Deterministic in (cfg, index): sample i draws from the substream split(i).
SampleRecord generate_one(const GenConfig& cfg, int index);
std::vector<SampleRecord> generate(const GenConfig& cfg, int n);

/// Normalized class pixel counts.
CategoricalDist sizes_from_mask(const LabelMap& mask, int classes);
/// Classes with nonzero size.
TagSet tags_from_sizes(const CategoricalDist& sizes);

struct ScribbleConfig {
  /// Stroke length as a fraction of the region skeleton; 0 means one click.
  double length_ratio = 0.0;
  int stroke_width = 1;
  std::uint64_t seed = 0;
};

/// One stroke per connected object region, grown along the region skeleton
/// from its most interior point, plus one stroke (or click) on the largest
/// background region. Seeds are sorted by pixel index.
SeedSet generate_scribbles(const LabelMap& mask, int classes, const ScribbleConfig& cfg);

/// Mean of the exact sizes over a dataset, renormalized.
CategoricalDist dataset_mean_sizes(std::span<const SampleRecord> dataset);

}  // namespace sizeseg
