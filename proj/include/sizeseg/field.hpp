#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sizeseg {

/// Per-pixel K-class soft predictions over an H x W domain together with the
/// logits that produced them. Storage is pixel-major: index `p * K + k`.
///
/// A batch of image-level predictions is represented as a 1 x n field, so the
/// dataset-level losses reuse the same softmax/averaging machinery.
class PredictionField {
 public:
  PredictionField() = default;
  /// Computes probs as the row-wise softmax of `logits`.
  PredictionField(int height, int width, int classes, std::vector<double> logits);

  /// Builds a field from given per-pixel distributions. Logits are ln(probs)
  /// (zero probabilities map to -inf), so softmax(logits) recovers probs.
  static PredictionField from_probs(int height, int width, int classes, std::vector<double> probs);

  int height() const { return height_; }
  int width() const { return width_; }
  int classes() const { return classes_; }
  std::size_t pixels() const { return std::size_t(height_) * width_; }

  std::span<const double> logits() const { return logits_; }
  std::span<const double> probs() const { return probs_; }
  std::span<const double> prob(std::size_t pixel) const {
    return std::span<const double>(probs_).subspan(pixel * classes_, classes_);
  }
  double prob(std::size_t pixel, int k) const { return probs_[pixel * classes_ + k]; }

 private:
  int height_ = 0;
  int width_ = 0;
  int classes_ = 0;
  std::vector<double> logits_;
  std::vector<double> probs_;
};

/// Row-wise softmax of `logits` (rows of length `classes`) into `out`.
void softmax_rows(std::span<const double> logits, int classes, std::span<double> out);

/// Chains dL/dprobs through the softmax: g_z[p,k] = S[p,k] (g[p,k] - sum_j S[p,j] g[p,j]).
std::vector<double> softmax_backward(const PredictionField& field, std::span<const double> prob_grad);

}  // namespace sizeseg
