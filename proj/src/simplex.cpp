#include "sizeseg/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "sizeseg/errors.hpp"

namespace sizeseg {

CategoricalDist::CategoricalDist(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw DomainError("CategoricalDist: empty distribution");
  double total = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw DomainError("CategoricalDist: entries must be finite and >= 0");
    total += p;
  }
  if (std::abs(total - 1.0) > kSimplexTolerance)
    throw DomainError("CategoricalDist: entries sum to " + std::to_string(total) + ", expected 1");
}

CategoricalDist CategoricalDist::normalized(std::vector<double> weights) {
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw DomainError("CategoricalDist::normalized: weights must be finite and >= 0");
    total += w;
  }
  if (!(total > 0.0)) throw DomainError("CategoricalDist::normalized: zero total mass");
  for (double& w : weights) w /= total;
  return CategoricalDist(std::move(weights));
}

SaturatingValue kl_forward(std::span<const double> v, std::span<const double> q) {
  if (v.size() != q.size()) throw DomainError("kl_forward: dimension mismatch");
  double total = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (v[k] == 0.0) continue;
    if (q[k] == 0.0) return SaturatingValue::saturated();
    total += v[k] * std::log(v[k] / q[k]);
  }
  // Rounding can leave tiny negatives for v == q.
  return {std::max(total, 0.0), false};
}

SaturatingValue kl_forward(const CategoricalDist& v, const CategoricalDist& q) {
  return kl_forward(v.probs(), q.probs());
}

std::optional<double> kl_reverse(std::span<const double> q, std::span<const double> v) {
  if (v.size() != q.size()) throw DomainError("kl_reverse: dimension mismatch");
  double total = 0.0;
  for (std::size_t k = 0; k < q.size(); ++k) {
    if (q[k] == 0.0) continue;
    if (v[k] == 0.0) return std::nullopt;
    total += q[k] * std::log(q[k] / v[k]);
  }
  return std::max(total, 0.0);
}

std::optional<double> kl_reverse(const CategoricalDist& q, const CategoricalDist& v) {
  return kl_reverse(q.probs(), v.probs());
}

CategoricalDist average_prediction(const PredictionField& field) {
  const std::size_t n = field.pixels();
  if (n == 0) throw DomainError("average_prediction: empty pixel domain");
  const int K = field.classes();
  std::vector<double> mean(K, 0.0);
  const auto probs = field.probs();
  for (std::size_t p = 0; p < n; ++p)
    for (int k = 0; k < K; ++k) mean[k] += probs[p * K + k];
  for (double& m : mean) m /= double(n);
  // Summation error is O(n eps); renormalize to keep the 1e-9 invariant exact.
  return CategoricalDist::normalized(std::move(mean));
}

CategoricalDist uniform_over(std::span<const int> tags, int classes) {
  if (tags.empty()) throw DomainError("uniform_over: empty tag set");
  std::vector<double> probs(classes, 0.0);
  std::vector<bool> seen(classes, false);
  std::size_t distinct = 0;
  for (int t : tags) {
    if (t < 0 || t >= classes) throw DomainError("uniform_over: tag id out of range");
    if (!seen[t]) {
      seen[t] = true;
      ++distinct;
    }
  }
  for (int k = 0; k < classes; ++k)
    if (seen[k]) probs[k] = 1.0 / double(distinct);
  return CategoricalDist(std::move(probs));
}

CategoricalDist apply_size_noise(const CategoricalDist& exact, std::span<const double> eps) {
  if (eps.size() != exact.size()) throw DomainError("apply_size_noise: one noise value per class required");
  std::vector<double> out(exact.size(), 0.0);
  double total = 0.0;
  for (std::size_t k = 0; k < exact.size(); ++k) {
    if (exact[k] == 0.0) continue;
    out[k] = std::max(0.0, (1.0 + eps[k]) * exact[k]);
    total += out[k];
  }
  if (!(total > 0.0)) throw DomainError("apply_size_noise: every entry clamped to zero");
  for (double& x : out) x /= total;
  return CategoricalDist(std::move(out));
}

CategoricalDist corrupt_sizes(const CategoricalDist& exact, double sigma, Rng& rng) {
  if (!(sigma >= 0.0)) throw DomainError("corrupt_sizes: sigma must be >= 0");
  if (sigma == 0.0) return exact;
  std::vector<double> eps(exact.size(), 0.0);
  for (;;) {
    bool any_positive = false;
    for (std::size_t k = 0; k < exact.size(); ++k) {
      if (exact[k] == 0.0) continue;
      eps[k] = sigma * rng.normal();
      any_positive = any_positive || (1.0 + eps[k]) > 0.0;
    }
    if (any_positive) return apply_size_noise(exact, eps);
  }
}

CategoricalDist corrupt_sizes(const CategoricalDist& exact, const CorruptionConfig& cfg) {
  Rng rng(cfg.rng_seed);
  return corrupt_sizes(exact, cfg.sigma, rng);
}

double mre_for_sigma(double sigma) {
  if (!(sigma >= 0.0)) throw DomainError("mre_for_sigma: sigma must be >= 0");
  return std::sqrt(2.0 / std::numbers::pi) * sigma;
}

double sigma_for_mre(double mre) {
  if (!(mre >= 0.0)) throw DomainError("sigma_for_mre: mRE must be >= 0");
  return std::sqrt(std::numbers::pi / 2.0) * mre;
}

}  // namespace sizeseg
