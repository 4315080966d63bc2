#include "sizeseg/dataset_io.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "sizeseg/errors.hpp"
#include "sizeseg/pngio.hpp"

namespace sizeseg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kManifestFormat = "sizeseg-dataset";

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw RuntimeFailure("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw RuntimeFailure("write failed: " + path.string());
}

json parse_file(const fs::path& path) {
  try {
    return json::parse(read_file_bytes(path));
  } catch (const json::exception& e) {
    throw RuntimeFailure("invalid JSON in " + path.string() + ": " + e.what());
  }
}

}  // namespace

std::vector<std::string> default_class_names(GenMode mode, int classes) {
  static const char* kShapeNames[] = {"red", "green", "blue", "yellow", "magenta", "cyan", "orange", "purple"};
  std::vector<std::string> names{"background"};
  for (int k = 1; k < classes; ++k) {
    if (mode == GenMode::MedicalLike)
      names.push_back("cavity");
    else
      names.push_back(k - 1 < kPaletteSize ? kShapeNames[k - 1] : "class" + std::to_string(k));
  }
  return names;
}

std::string sizes_to_json(const SizesMap& sizes) {
  json j = json::object();
  for (const auto& [id, dist] : sizes) {
    json entry = json::object();
    for (std::size_t k = 0; k < dist.size(); ++k)
      if (dist[k] > 0.0) entry[std::to_string(k)] = dist[k];
    j[id] = entry;
  }
  return j.dump(2) + "\n";
}

SizesMap sizes_from_json(const std::string& text, int classes) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw RuntimeFailure(std::string("sizes file: ") + e.what());
  }
  if (!j.is_object()) throw RuntimeFailure("sizes file: top level must be an object");
  SizesMap out;
  for (const auto& [id, entry] : j.items()) {
    if (!entry.is_object()) throw RuntimeFailure("sizes file: entry for " + id + " must be an object");
    std::vector<double> probs(std::size_t(classes), 0.0);
    double total = 0.0;
    for (const auto& [key, value] : entry.items()) {
      std::size_t pos = 0;
      int k = -1;
      try {
        k = std::stoi(key, &pos);
      } catch (const std::exception&) {
      }
      if (k < 0 || k >= classes || pos != key.size())
        throw RuntimeFailure("sizes file: bad class id '" + key + "' for " + id);
      if (!value.is_number()) throw RuntimeFailure("sizes file: fraction must be a number for " + id);
      const double v = value.get<double>();
      if (!(v >= 0.0)) throw RuntimeFailure("sizes file: negative fraction for " + id);
      probs[std::size_t(k)] = v;
      total += v;
    }
    if (std::abs(total - 1.0) > kSizesFileTolerance)
      throw RuntimeFailure("sizes file: fractions for " + id + " sum to " + std::to_string(total));
    out.emplace(id, CategoricalDist::normalized(std::move(probs)));
  }
  return out;
}

SizesMap read_sizes_file(const fs::path& path, int classes) { return sizes_from_json(read_file_bytes(path), classes); }

void write_sizes_file(const fs::path& path, const SizesMap& sizes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_text(path, sizes_to_json(sizes));
}

std::string seeds_to_json(const std::string& image_id, int width, const SeedSet& seeds) {
  json list = json::array();
  for (const auto& s : seeds) list.push_back({int(s.pixel % std::uint32_t(width)), int(s.pixel / std::uint32_t(width)), s.label});
  json j{{"image_id", image_id}, {"seeds", list}};
  return j.dump() + "\n";
}

SeedSet seeds_from_json(const std::string& text, int width) {
  try {
    const json j = json::parse(text);
    SeedSet seeds;
    for (const auto& item : j.at("seeds")) {
      const int x = item.at(0).get<int>(), y = item.at(1).get<int>();
      if (x < 0 || x >= width || y < 0) throw RuntimeFailure("seeds file: pixel out of bounds");
      seeds.push_back({std::uint32_t(y * width + x), item.at(2).get<int>()});
    }
    return seeds;
  } catch (const json::exception& e) {
    throw RuntimeFailure(std::string("seeds file: ") + e.what());
  }
}

SizesMap exact_sizes_map(const Dataset& dataset) {
  SizesMap m;
  for (const auto& s : dataset.samples) m.emplace(s.id, s.exact_sizes);
  return m;
}

void write_dataset(const fs::path& dir, const Dataset& dataset) {
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "masks");
  fs::create_directories(dir / "sizes");
  json images = json::array();
  int height = 0, width = 0;
  for (const auto& s : dataset.samples) {
    height = s.image.height;
    width = s.image.width;
    const std::string image_rel = "images/" + s.id + ".png";
    const std::string mask_rel = "masks/" + s.id + ".png";
    write_image_png(dir / image_rel, s.image);
    write_mask_png(dir / mask_rel, s.mask);
    json entry{{"id", s.id}, {"image", image_rel}, {"mask", mask_rel}, {"tags", s.tags}};
    json sizes = json::object();
    for (std::size_t k = 0; k < s.exact_sizes.size(); ++k)
      if (s.exact_sizes[k] > 0.0) sizes[std::to_string(k)] = s.exact_sizes[k];
    entry["sizes"] = sizes;
    if (s.seeds) {
      fs::create_directories(dir / "seeds");
      const std::string seeds_rel = "seeds/" + s.id + ".json";
      write_text(dir / seeds_rel, seeds_to_json(s.id, s.image.width, *s.seeds));
      entry["seeds"] = seeds_rel;
    }
    images.push_back(entry);
  }
  json manifest{{"format", kManifestFormat}, {"version", 1},         {"classes", dataset.classes},
                {"class_names", dataset.class_names}, {"height", height}, {"width", width},
                {"images", images}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  write_sizes_file(dir / "sizes" / "exact.json", exact_sizes_map(dataset));
}

Dataset load_dataset(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) throw RuntimeFailure("no manifest.json in " + dir.string());
  const json m = parse_file(manifest_path);
  Dataset d;
  try {
    if (m.value("format", std::string()) != kManifestFormat) throw RuntimeFailure("unrecognized manifest format");
    d.classes = m.at("classes").get<int>();
    d.class_names = m.value("class_names", std::vector<std::string>{});
    for (const auto& entry : m.at("images")) {
      SampleRecord s;
      s.id = entry.at("id").get<std::string>();
      s.image = read_image_png(dir / entry.at("image").get<std::string>());
      s.mask = read_mask_png(dir / entry.at("mask").get<std::string>());
      if (s.mask.height != s.image.height || s.mask.width != s.image.width)
        throw RuntimeFailure("mask and image sizes differ for " + s.id);
      s.exact_sizes = sizes_from_mask(s.mask, d.classes);
      s.tags = tags_from_sizes(s.exact_sizes);
      if (entry.contains("seeds"))
        s.seeds = seeds_from_json(read_file_bytes(dir / entry.at("seeds").get<std::string>()), s.image.width);
      d.samples.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw RuntimeFailure("malformed manifest: " + std::string(e.what()));
  }
  if (d.class_names.size() != std::size_t(d.classes)) d.class_names = default_class_names(GenMode::Shapes, d.classes);
  return d;
}

std::size_t apply_sizes(Dataset& dataset, const SizesMap& sizes) {
  std::size_t updated = 0;
  for (auto& s : dataset.samples) {
    const auto it = sizes.find(s.id);
    if (it == sizes.end()) continue;
    if (it->second.size() != std::size_t(dataset.classes)) throw DomainError("apply_sizes: class count mismatch");
    s.sizes = it->second;
    ++updated;
  }
  return updated;
}

}  // namespace sizeseg
