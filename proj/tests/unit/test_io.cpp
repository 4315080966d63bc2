#include <doctest.h>

#include <filesystem>

#include "sizeseg/dataset_io.hpp"
#include "sizeseg/errors.hpp"
#include "sizeseg/pngio.hpp"

using namespace sizeseg;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("sizeseg_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("png round trips") {
  auto dir = scratch("png");
  GenConfig cfg;
  auto s = generate_one(cfg, 0);
  write_mask_png(dir / "m.png", s.mask);
  CHECK(read_mask_png(dir / "m.png").labels == s.mask.labels);
  write_image_png(dir / "i.png", s.image);
  auto img = read_image_png(dir / "i.png");
  REQUIRE(img.data.size() == s.image.data.size());
  for (std::size_t i = 0; i < img.data.size(); ++i) CHECK(std::abs(img.data[i] - s.image.data[i]) <= 0.5 / 255 + 1e-12);
  CHECK_THROWS_AS(read_png(dir / "missing.png"), RuntimeFailure);
  fs::remove_all(dir);
}

TEST_CASE("dataset round trip") {
  auto dir = scratch("dataset");
  GenConfig cfg;
  Dataset ds;
  ds.classes = cfg.classes;
  ds.class_names = default_class_names(cfg.mode, cfg.classes);
  ds.samples = generate(cfg, 3);
  ds.samples[1].seeds = generate_scribbles(ds.samples[1].mask, cfg.classes, {});
  write_dataset(dir, ds);
  auto back = load_dataset(dir);
  REQUIRE(back.samples.size() == 3);
  CHECK(back.classes == ds.classes);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back.samples[i].id == ds.samples[i].id);
    CHECK(back.samples[i].mask.labels == ds.samples[i].mask.labels);
    CHECK(back.samples[i].exact_sizes == ds.samples[i].exact_sizes);
    CHECK(back.samples[i].tags == ds.samples[i].tags);
  }
  CHECK(back.samples[1].seeds == ds.samples[1].seeds);
  CHECK(fs::exists(dir / "sizes" / "exact.json"));
  fs::remove_all(dir);
  CHECK_THROWS(load_dataset(dir));
}

TEST_CASE("sizes file invariant") {
  SizesMap m{{"a", CategoricalDist({0.25, 0.75})}};
  auto back = sizes_from_json(sizes_to_json(m), 2);
  CHECK(back.at("a") == m.at("a"));
  CHECK_THROWS(sizes_from_json(R"({"a":{"0":0.5,"1":0.6}})", 2));
  CHECK_THROWS(sizes_from_json(R"({"a":{"0":-0.5,"1":1.5}})", 2));
  CHECK_NOTHROW(sizes_from_json(R"({"a":{"0":0.5,"1":0.5000001}})", 2));
}

TEST_CASE("apply sizes assigns working targets") {
  GenConfig cfg;
  Dataset ds;
  ds.classes = cfg.classes;
  ds.samples = generate(cfg, 2);
  SizesMap m = exact_sizes_map(ds);
  m.erase(ds.samples[1].id);
  CHECK(apply_sizes(ds, m) == 1);
  CHECK(ds.samples[0].sizes.has_value());
  CHECK_FALSE(ds.samples[1].sizes.has_value());
}

TEST_CASE("seeds json round trip") {
  SeedSet s{{3, 1}, {17, 0}};
  CHECK(seeds_from_json(seeds_to_json("x", 8, s), 8) == s);
}

}
