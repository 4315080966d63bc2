#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "sizeseg/field.hpp"
#include "sizeseg/rng.hpp"

namespace sizeseg {

inline constexpr double kSimplexTolerance = 1e-9;

/// Point on the K-simplex: nonnegative entries summing to one (within 1e-9).
/// Used for size targets, average predictions and priors alike.
class CategoricalDist {
 public:
  CategoricalDist() = default;
  /// Validates the invariants; throws DomainError otherwise.
  explicit CategoricalDist(std::vector<double> probs);

  /// Renormalizes nonnegative weights with a positive total.
  static CategoricalDist normalized(std::vector<double> weights);

  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t k) const { return probs_[k]; }
  std::span<const double> probs() const { return probs_; }
  const std::vector<double>& vec() const { return probs_; }

  friend bool operator==(const CategoricalDist&, const CategoricalDist&) = default;

 private:
  std::vector<double> probs_;
};

/// Saturating result of a divergence that can be infinite. When `infinite` is
/// set, `value` holds the largest finite double so arithmetic stays finite.
struct SaturatingValue {
  double value = 0.0;
  bool infinite = false;

  static SaturatingValue saturated() { return {std::numeric_limits<double>::max(), true}; }
};

/// KL(v || q) = sum_k v_k ln(v_k / q_k) with 0 ln(0/q) = 0. Infinite (flagged)
/// when v_k > 0 meets q_k = 0: the zero-avoiding case.
SaturatingValue kl_forward(const CategoricalDist& v, const CategoricalDist& q);
SaturatingValue kl_forward(std::span<const double> v, std::span<const double> q);

/// KL(q || v) with the estimate first. nullopt (undefined) when some q_k > 0
/// but v_k = 0: the target has zero support where the estimate has mass.
std::optional<double> kl_reverse(const CategoricalDist& q, const CategoricalDist& v);
std::optional<double> kl_reverse(std::span<const double> q, std::span<const double> v);

/// Mean of the per-pixel predictions over the whole domain.
CategoricalDist average_prediction(const PredictionField& field);

/// Uniform mass 1/|T| on each tag class, zero elsewhere.
CategoricalDist uniform_over(std::span<const int> tags, int classes);

struct CorruptionConfig {
  double sigma = 0.0;
  std::uint64_t rng_seed = 0;
};

/// Multiplies every positive entry by (1 + eps_k), eps_k ~ N(0, sigma) i.i.d.,
/// clamps negatives to zero and renormalizes. Zero entries stay zero. If every
/// entry clamps to zero the noise is redrawn.
CategoricalDist corrupt_sizes(const CategoricalDist& exact, const CorruptionConfig& cfg);
CategoricalDist corrupt_sizes(const CategoricalDist& exact, double sigma, Rng& rng);

/// Deterministic core of corrupt_sizes with the noise supplied: one eps per
/// entry (entries with zero mass ignore theirs). Throws DomainError if all
/// entries clamp to zero.
CategoricalDist apply_size_noise(const CategoricalDist& exact, std::span<const double> eps);

/// Expected relative size error of the corruption, mRE = sqrt(2/pi) sigma
/// (mean absolute deviation of N(0, sigma)), and its inverse.
double mre_for_sigma(double sigma);
double sigma_for_mre(double mre);

}  // namespace sizeseg
