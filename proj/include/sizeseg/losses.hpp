#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sizeseg/affinity.hpp"
#include "sizeseg/field.hpp"
#include "sizeseg/image.hpp"
#include "sizeseg/simplex.hpp"

namespace sizeseg {

inline constexpr double kDefaultLogFloor = 1e-12;

/// Scalar loss plus its gradient with respect to the field's logits (same
/// pixel-major layout). `saturated` marks an infinite value stored as the
/// largest finite double.
struct LossValue {
  double value = 0.0;
  bool saturated = false;
  std::vector<double> grad;
};

/// `log_floor` clamps arguments of logarithms from below (and 1 - x terms in
/// the suppression loss). 0 gives the exact analytic forms.
struct LossOptions {
  double log_floor = kDefaultLogFloor;
};

using TagSet = std::vector<int>;

struct Seed {
  std::uint32_t pixel;
  int label;
  friend bool operator==(const Seed&, const Seed&) = default;
};
using SeedSet = std::vector<Seed>;

enum class FlatBarrierForm {
  /// -sum_{k in T} ln(min{S_k, eps} / eps): zero at or above eps, log barrier below.
  ZeroAboveThreshold,
  /// -sum_{k in T} ln max{S_k, eps} exactly as printed: constant below eps.
  LiteralMax,
};

struct BarrierConfig {
  double epsilon = 0.1;
  /// Per-class lower size bounds a_k for the quadratic barrier.
  std::vector<double> lower_bounds;
  FlatBarrierForm flat_form = FlatBarrierForm::ZeroAboveThreshold;
};

struct WeightedCEConfig {
  double beta = 0.9;
  /// Per-class counts v_k over the training set.
  std::vector<double> class_counts;
};

struct TotalLossWeights {
  double size = 1.0;
  double crf = 1.0;
  double pce = 1.0;
};

void validate_tags(const TagSet& tags, int classes);
void validate_seeds(const SeedSet& seeds, std::size_t pixels, int classes);

// Pixel-level losses. Those defined on the average prediction chain through
// the mean over pixels and the softmax.

/// KL(v || S_mean).
LossValue size_target_loss(const PredictionField& field, const CategoricalDist& v, const LossOptions& opts = {});
/// sum_k (1 - S^k)^T W S^k, the bilinear Potts relaxation.
LossValue crf_loss(const PredictionField& field, const AffinityGraph& graph);
/// -sum_{p in seeds} ln S_p^{y_p}; zero for an empty seed set.
LossValue partial_ce_loss(const PredictionField& field, const SeedSet& seeds, const LossOptions& opts = {});
/// -sum_{k in T} ln S_mean^k.
LossValue expansion_loss(const PredictionField& field, const TagSet& tags, const LossOptions& opts = {});
/// -sum_{k not in T} ln(1 - S_mean^k).
LossValue suppression_loss(const PredictionField& field, const TagSet& tags, const LossOptions& opts = {});
LossValue flat_log_barrier(const PredictionField& field, const TagSet& tags, const BarrierConfig& cfg,
                           const LossOptions& opts = {});
/// sum_k (max{a_k - S_mean^k, 0})^2. The kink a_k = S_mean^k has gradient 0.
LossValue quadratic_barrier(const PredictionField& field, const BarrierConfig& cfg);
/// (S_mean^obj)^2, used to push an absent class to zero size.
LossValue absent_class_suppressor(const PredictionField& field, int obj_class);
/// Mean per-pixel cross-entropy against a full mask.
LossValue mask_cross_entropy(const PredictionField& field, const LabelMap& mask, const LossOptions& opts = {});

// Image-level losses over a batch of n predictions stored as a 1 x n field.

/// -H(S_hat) with S_hat the batch mean. Equals KL(S_hat || u) - ln K.
LossValue fairness_loss(const PredictionField& batch, const LossOptions& opts = {});
/// KL(S_hat || v); nullopt when v has a zero where S_hat has mass.
std::optional<LossValue> balance_loss(const PredictionField& batch, const CategoricalDist& v,
                                      const LossOptions& opts = {});
/// -sum_i w_{y_i} ln S_i^{y_i}.
LossValue weighted_ce_loss(const PredictionField& batch, std::span<const int> labels, const WeightedCEConfig& cfg,
                           const LossOptions& opts = {});

double fairness_loss(std::span<const CategoricalDist> batch);
std::optional<double> balance_loss(std::span<const CategoricalDist> batch, const CategoricalDist& v);
double weighted_ce_loss(std::span<const CategoricalDist> predictions, std::span<const int> labels,
                        const WeightedCEConfig& cfg);

/// 1 / (1 - beta^count), before normalization.
double unnormalized_class_weight(double beta, double count);
/// Weights normalized so they sum to K. Classes with zero count get weight 0.
std::vector<double> class_weights(const WeightedCEConfig& cfg);

/// size + crf with per-term weights.
LossValue total_loss_image_level(const PredictionField& field, const CategoricalDist& v, const AffinityGraph& graph,
                                 const TotalLossWeights& weights = {}, const LossOptions& opts = {});
/// size + crf + partial cross-entropy.
LossValue total_loss_seeded(const PredictionField& field, const CategoricalDist& v, const AffinityGraph& graph,
                            const SeedSet& seeds, const TotalLossWeights& weights = {},
                            const LossOptions& opts = {});

/// out += scale * term (value and gradient). Saturation is sticky.
void accumulate(LossValue& out, const LossValue& term, double scale = 1.0);

}  // namespace sizeseg
