#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "sizeseg/synthdata.hpp"

namespace sizeseg {

struct Dataset {
  int classes = 0;
  std::vector<std::string> class_names;
  std::vector<SampleRecord> samples;
};

std::vector<std::string> default_class_names(GenMode mode, int classes);

/// Sizes file: JSON object mapping image id -> {class id -> fraction}. Each
/// entry's fractions are >= 0 and sum to 1 within 1e-6.
using SizesMap = std::map<std::string, CategoricalDist>;

inline constexpr double kSizesFileTolerance = 1e-6;

SizesMap read_sizes_file(const std::filesystem::path& path, int classes);
void write_sizes_file(const std::filesystem::path& path, const SizesMap& sizes);
std::string sizes_to_json(const SizesMap& sizes);
SizesMap sizes_from_json(const std::string& text, int classes);

/// Writes manifest.json, images/*.png, masks/*.png, sizes/exact.json and, for
/// samples that carry seeds, seeds/<id>.json.
void write_dataset(const std::filesystem::path& dir, const Dataset& dataset);

/// Loads a dataset directory. Exact sizes are recomputed from the masks.
Dataset load_dataset(const std::filesystem::path& dir);

/// Assigns working sizes from a sizes map. Samples missing from the map keep
/// their current working sizes; returns the number of samples updated.
std::size_t apply_sizes(Dataset& dataset, const SizesMap& sizes);

SizesMap exact_sizes_map(const Dataset& dataset);

std::string seeds_to_json(const std::string& image_id, int width, const SeedSet& seeds);
SeedSet seeds_from_json(const std::string& text, int width);

}  // namespace sizeseg
