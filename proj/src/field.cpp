#include "sizeseg/field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sizeseg/errors.hpp"

namespace sizeseg {

void softmax_rows(std::span<const double> logits, int classes, std::span<double> out) {
  const std::size_t rows = logits.size() / classes;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* z = logits.data() + r * classes;
    double* s = out.data() + r * classes;
    const double zmax = *std::max_element(z, z + classes);
    double total = 0.0;
    for (int k = 0; k < classes; ++k) {
      s[k] = std::exp(z[k] - zmax);
      total += s[k];
    }
    const double inv = 1.0 / total;
    for (int k = 0; k < classes; ++k) s[k] *= inv;
  }
}

PredictionField::PredictionField(int height, int width, int classes, std::vector<double> logits)
    : height_(height), width_(width), classes_(classes), logits_(std::move(logits)) {
  if (height <= 0 || width <= 0) throw DomainError("PredictionField: empty pixel domain");
  if (classes <= 0) throw DomainError("PredictionField: need at least one class");
  if (logits_.size() != pixels() * std::size_t(classes))
    throw DomainError("PredictionField: logits size does not match H*W*K");
  probs_.resize(logits_.size());
  softmax_rows(logits_, classes_, probs_);
}

PredictionField PredictionField::from_probs(int height, int width, int classes, std::vector<double> probs) {
  if (height <= 0 || width <= 0) throw DomainError("PredictionField: empty pixel domain");
  if (classes <= 0) throw DomainError("PredictionField: need at least one class");
  const std::size_t n = std::size_t(height) * width;
  if (probs.size() != n * std::size_t(classes))
    throw DomainError("PredictionField: probs size does not match H*W*K");
  for (std::size_t p = 0; p < n; ++p) {
    double total = 0.0;
    for (int k = 0; k < classes; ++k) {
      const double v = probs[p * classes + k];
      if (!(v >= 0.0)) throw DomainError("PredictionField: negative probability");
      total += v;
    }
    if (std::abs(total - 1.0) > 1e-9) throw DomainError("PredictionField: pixel distribution does not sum to 1");
  }
  PredictionField f;
  f.height_ = height;
  f.width_ = width;
  f.classes_ = classes;
  f.logits_.resize(probs.size());
  std::transform(probs.begin(), probs.end(), f.logits_.begin(), [](double v) {
    return v > 0.0 ? std::log(v) : -std::numeric_limits<double>::infinity();
  });
  f.probs_ = std::move(probs);
  return f;
}

std::vector<double> softmax_backward(const PredictionField& field, std::span<const double> prob_grad) {
  const int K = field.classes();
  const auto probs = field.probs();
  std::vector<double> out(probs.size());
  for (std::size_t p = 0; p < field.pixels(); ++p) {
    const double* s = probs.data() + p * K;
    const double* g = prob_grad.data() + p * K;
    double dot = 0.0;
    for (int k = 0; k < K; ++k) dot += s[k] * g[k];
    for (int k = 0; k < K; ++k) out[p * K + k] = s[k] * (g[k] - dot);
  }
  return out;
}

}  // namespace sizeseg
