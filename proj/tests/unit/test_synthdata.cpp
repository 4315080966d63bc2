#include <doctest.h>

#include <cmath>
#include <set>

#include "sizeseg/errors.hpp"
#include "sizeseg/synthdata.hpp"

using namespace sizeseg;

namespace {

LabelMap blocks() {
  // three separated object squares on background
  LabelMap m(16, 16);
  for (int y = 2; y < 6; ++y)
    for (int x = 2; x < 6; ++x) m.at(y, x) = 1;
  for (int y = 9; y < 14; ++y)
    for (int x = 2; x < 7; ++x) m.at(y, x) = 2;
  for (int y = 3; y < 13; ++y)
    for (int x = 10; x < 14; ++x) m.at(y, x) = 1;
  return m;
}

}  // namespace

TEST_SUITE("synthdata") {

TEST_CASE("generation is deterministic") {
  GenConfig cfg;
  cfg.seed = 5;
  auto a = generate_one(cfg, 3);
  auto b = generate_one(cfg, 3);
  CHECK(a.image.data == b.image.data);
  CHECK(a.mask.labels == b.mask.labels);
  CHECK(generate(cfg, 4)[3].image.data == a.image.data);
  cfg.seed = 6;
  CHECK(generate_one(cfg, 3).image.data != a.image.data);
}

TEST_CASE("samples satisfy the record invariants") {
  for (auto mode : {GenMode::Shapes, GenMode::MedicalLike}) {
    GenConfig cfg;
    cfg.mode = mode;
    cfg.classes = mode == GenMode::Shapes ? 5 : 2;
    cfg.absent_probability = mode == GenMode::MedicalLike ? 0.2 : 0.0;
    for (const auto& s : generate(cfg, 30)) {
      double sum = 0;
      for (double v : s.exact_sizes.probs()) sum += v;
      CHECK(std::abs(sum - 1.0) < 1e-12);
      CHECK(sizes_from_mask(s.mask, cfg.classes) == s.exact_sizes);
      for (int t : s.tags) CHECK(s.exact_sizes[std::size_t(t)] > 0.0);
      CHECK(s.tags == tags_from_sizes(s.exact_sizes));
      for (double x : s.image.data) CHECK((x >= 0.0 && x <= 1.0));
    }
  }
}

TEST_CASE("medical-like area variability") {
  GenConfig cfg;
  cfg.mode = GenMode::MedicalLike;
  cfg.classes = 2;
  cfg.size_variability = 0.05;
  auto samples = generate(cfg, 1000);
  double sum = 0, sq = 0;
  for (const auto& s : samples) {
    sum += s.exact_sizes[1];
    sq += s.exact_sizes[1] * s.exact_sizes[1];
  }
  double mean = sum / 1000, var = sq / 1000 - mean * mean;
  CHECK(std::sqrt(var) / mean < 0.10);
}

TEST_CASE("infeasible configs") {
  GenConfig cfg;
  cfg.classes = kPaletteSize + 2;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg.classes = 1;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  GenConfig med;
  med.mode = GenMode::MedicalLike;
  med.classes = 3;
  CHECK_THROWS_AS(validate(med), ConfigError);
  CHECK_THROWS_AS(generate(GenConfig{}, 0), DomainError);
}

TEST_CASE("sizes from mask examples") {
  CHECK(sizes_from_mask(LabelMap(4, 4), 3).vec() == std::vector<double>{1, 0, 0});
  LabelMap half(2, 2);
  half.at(0, 0) = half.at(0, 1) = 1;
  CHECK(sizes_from_mask(half, 2).vec() == std::vector<double>{0.5, 0.5});
  LabelMap big(64, 64);
  for (int i = 0; i < 1024; ++i) big.labels[std::size_t(i)] = 1;
  CHECK(sizes_from_mask(big, 2)[1] == 0.25);
}

TEST_CASE("one click per region plus background") {
  auto m = blocks();
  auto seeds = generate_scribbles(m, 3, {0.0, 1, 7});
  CHECK(seeds.size() == 4);
  for (const auto& s : seeds) CHECK(m.labels[s.pixel] == s.label);
  std::set<int> labels;
  for (const auto& s : seeds) labels.insert(s.label);
  CHECK(labels == std::set<int>{0, 1, 2});
}

TEST_CASE("longer scribbles carry more seeds") {
  GenConfig cfg;
  for (const auto& s : generate(cfg, 10)) {
    auto click = generate_scribbles(s.mask, cfg.classes, {0.0, 1, 1});
    auto full = generate_scribbles(s.mask, cfg.classes, {1.0, 1, 1});
    CHECK(full.size() > click.size());
    for (const auto& seed : full) {
      REQUIRE(seed.pixel < s.mask.pixels());
      CHECK(s.mask.labels[seed.pixel] == seed.label);
    }
    CHECK(std::is_sorted(full.begin(), full.end(), [](auto a, auto b) { return a.pixel < b.pixel; }));
  }
  CHECK_THROWS_AS(generate_scribbles(blocks(), 3, {1.5, 1, 0}), ConfigError);
}

TEST_CASE("single pixel regions degrade to a click") {
  LabelMap m(5, 5);
  m.at(2, 2) = 1;
  auto seeds = generate_scribbles(m, 2, {1.0, 3, 0});
  int object = 0;
  for (const auto& s : seeds) object += s.label == 1;
  CHECK(object == 1);
}

TEST_CASE("dataset mean sizes") {
  SampleRecord a, b;
  a.exact_sizes = CategoricalDist({0.2, 0.8});
  b.exact_sizes = CategoricalDist({0.4, 0.6});
  std::vector<SampleRecord> one{a}, two{a, b}, none;
  CHECK(dataset_mean_sizes(one) == a.exact_sizes);
  auto m = dataset_mean_sizes(two);
  CHECK(std::abs(m[0] - 0.3) < 1e-15);
  CHECK(std::abs(m[1] - 0.7) < 1e-15);
  CHECK_THROWS_AS(dataset_mean_sizes(none), DomainError);
}

}
