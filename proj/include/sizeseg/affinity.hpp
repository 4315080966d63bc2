#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "sizeseg/image.hpp"

namespace sizeseg {

enum class Connectivity { Four, Eight, Disc };

struct AffinityConfig {
  /// Kernel bandwidth in intensity units. When unset, it is calibrated per
  /// image to the mean Euclidean intensity distance over neighbor pairs.
  std::optional<double> bandwidth;
  /// Disc radius in pixels; only used by Connectivity::Disc.
  int radius = 1;
  Connectivity connectivity = Connectivity::Four;
};

struct AffinityEdge {
  std::uint32_t p;
  std::uint32_t q;
  double weight;
};

/// Sparse symmetric pixel-pair weights. Each unordered pair is stored once with
/// p < q; the implied matrix has w_qp = w_pq and a zero diagonal.
struct AffinityGraph {
  int height = 0;
  int width = 0;
  double bandwidth = 0.0;
  int radius = 1;
  Connectivity connectivity = Connectivity::Four;
  std::vector<AffinityEdge> edges;

  std::size_t num_pixels() const { return std::size_t(height) * width; }
};

/// Gaussian intensity kernel w_pq = exp(-|I_p - I_q|^2 / (2 sigma^2)) on the
/// configured grid neighborhood. Pairs outside the neighborhood weigh 0.
AffinityGraph build_affinity(const Image& image, const AffinityConfig& cfg);

/// Builds a graph from explicit edges, checking the storage invariants.
AffinityGraph make_graph(int height, int width, std::vector<AffinityEdge> edges);

/// y = W x using the symmetric expansion of the half-stored edges.
std::vector<double> apply(const AffinityGraph& graph, std::span<const double> x);
void apply_into(const AffinityGraph& graph, std::span<const double> x, std::span<double> y);

/// Per-pixel weighted degree, i.e. W 1.
std::vector<double> degrees(const AffinityGraph& graph);

/// Binary cache: "SZAF" magic, u32 version, u32 H, u32 W, u64 edge count, then
/// per edge u32 p, u32 q, f64 w. Everything little-endian.
void write_affinity_cache(const AffinityGraph& graph, const std::filesystem::path& path);
AffinityGraph read_affinity_cache(const std::filesystem::path& path);

}  // namespace sizeseg
