#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "sizeseg/affinity.hpp"
#include "sizeseg/errors.hpp"
#include "sizeseg/rng.hpp"

using namespace sizeseg;

namespace {

Image random_image(int h, int w, int c, Rng& rng) {
  Image img(h, w, c);
  for (auto& x : img.data) x = rng.uniform();
  return img;
}

std::vector<double> dense_apply(const AffinityGraph& g, const std::vector<double>& x) {
  const std::size_t n = g.num_pixels();
  std::vector<double> W(n * n, 0.0), y(n, 0.0);
  for (const auto& e : g.edges) W[e.p * n + e.q] = W[e.q * n + e.p] = e.weight;
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t q = 0; q < n; ++q) y[p] += W[p * n + q] * x[q];
  return y;
}

}  // namespace

TEST_SUITE("affinity") {

TEST_CASE("constant image gives unit weights") {
  Image img(5, 4, 3);
  for (auto& x : img.data) x = 0.4;
  auto g = build_affinity(img, {});
  CHECK(g.edges.size() == std::size_t(5 * 3 + 4 * 4));
  for (const auto& e : g.edges) CHECK(e.weight == 1.0);
}

TEST_CASE("kernel value at one bandwidth") {
  Image img(1, 2, 1);
  img.at(0, 1, 0) = 0.3;
  AffinityConfig cfg;
  cfg.bandwidth = 0.3;
  auto g = build_affinity(img, cfg);
  REQUIRE(g.edges.size() == 1);
  CHECK(std::abs(g.edges[0].weight - std::exp(-0.5)) < 1e-12);
  CHECK(std::abs(g.edges[0].weight - 0.60653) < 1e-5);
}

TEST_CASE("grid combinatorics") {
  Rng rng(1);
  auto img = random_image(2, 2, 1, rng);
  CHECK(build_affinity(img, {}).edges.size() == 4);
  AffinityConfig eight;
  eight.connectivity = Connectivity::Eight;
  CHECK(build_affinity(img, eight).edges.size() == 6);
  auto big = random_image(6, 7, 3, rng);
  for (auto conn : {Connectivity::Four, Connectivity::Eight, Connectivity::Disc}) {
    AffinityConfig cfg;
    cfg.connectivity = conn;
    cfg.radius = 2;
    auto g = build_affinity(big, cfg);
    for (const auto& e : g.edges) {
      CHECK(e.p < e.q);
      CHECK(e.weight >= 0.0);
      CHECK(e.weight <= 1.0);
    }
  }
  CHECK_THROWS_AS(build_affinity(Image(), {}), DomainError);
}

TEST_CASE("make graph enforces storage invariants") {
  CHECK_THROWS_AS(make_graph(1, 2, {{1, 1, 1.0}}), ConfigError);
  CHECK_THROWS_AS(make_graph(1, 2, {{0, 1, -1.0}}), ConfigError);
  CHECK_THROWS_AS(make_graph(1, 2, {{0, 1, 1.0}, {1, 0, 1.0}}), ConfigError);
  CHECK_THROWS_AS(make_graph(1, 2, {{0, 5, 1.0}}), ConfigError);
}

TEST_CASE("apply examples") {
  auto empty = make_graph(2, 2, {});
  auto y = sizeseg::apply(empty, std::vector<double>{1, 2, 3, 4});
  for (double v : y) CHECK(v == 0.0);
  auto single = make_graph(1, 2, {{0, 1, 0.7}});
  auto s = sizeseg::apply(single, std::vector<double>{1, 0});
  CHECK(s[0] == 0.0);
  CHECK(s[1] == 0.7);
  CHECK_THROWS_AS(sizeseg::apply(single, std::vector<double>{1, 0, 0}), DomainError);
}

TEST_CASE("apply matches dense oracle and is symmetric") {
  Rng rng(2);
  for (int t = 0; t < 5; ++t) {
    AffinityConfig cfg;
    cfg.connectivity = Connectivity::Disc;
    cfg.radius = 2;
    auto g = build_affinity(random_image(6, 5, 3, rng), cfg);
    std::vector<double> x(30), z(30);
    for (auto& v : x) v = rng.normal();
    for (auto& v : z) v = rng.normal();
    auto y = sizeseg::apply(g, x);
    auto d = dense_apply(g, x);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(std::abs(y[i] - d[i]) < 1e-12);
    auto wz = sizeseg::apply(g, z);
    double a = 0, b = 0;
    for (std::size_t i = 0; i < 30; ++i) {
      a += x[i] * wz[i];
      b += z[i] * y[i];
    }
    CHECK(std::abs(a - b) < 1e-10);

    auto deg = degrees(g);
    auto ones = sizeseg::apply(g, std::vector<double>(30, 1.0));
    double sum_deg = 0, sum_w = 0;
    for (std::size_t i = 0; i < 30; ++i) {
      CHECK(std::abs(deg[i] - ones[i]) < 1e-12);
      sum_deg += deg[i];
    }
    for (const auto& e : g.edges) sum_w += e.weight;
    CHECK(std::abs(sum_deg - 2 * sum_w) < 1e-10);
  }
}

TEST_CASE("calibrated bandwidth is the mean neighbor distance") {
  Image img(1, 3, 1);
  img.at(0, 1, 0) = 0.2;
  img.at(0, 2, 0) = 0.8;
  auto g = build_affinity(img, {});
  CHECK(std::abs(g.bandwidth - 0.4) < 1e-12);
}

TEST_CASE("cache round trip") {
  Rng rng(3);
  auto g = build_affinity(random_image(4, 5, 3, rng), {});
  auto path = std::filesystem::temp_directory_path() / "sizeseg_affinity_cache.bin";
  write_affinity_cache(g, path);
  auto r = read_affinity_cache(path);
  CHECK(r.height == 4);
  CHECK(r.width == 5);
  REQUIRE(r.edges.size() == g.edges.size());
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    CHECK(r.edges[i].p == g.edges[i].p);
    CHECK(r.edges[i].weight == g.edges[i].weight);
  }
  std::filesystem::remove(path);
}

}
