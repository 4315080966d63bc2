#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "sizeseg/field.hpp"
#include "sizeseg/gradcheck.hpp"
#include "sizeseg/losses.hpp"
#include "sizeseg/rng.hpp"

namespace testutil {

inline std::vector<double> random_logits(int h, int w, int k, sizeseg::Rng& rng, double scale = 2.0) {
  std::vector<double> z(std::size_t(h) * w * k);
  for (auto& v : z) v = rng.normal(0.0, scale);
  return z;
}

inline sizeseg::CategoricalDist random_dist(int k, sizeseg::Rng& rng, bool full_support = true) {
  std::vector<double> w(k);
  for (auto& v : w) v = full_support ? 0.05 + rng.uniform() : (rng.uniform() < 0.4 ? 0.0 : rng.uniform());
  double s = 0;
  for (double v : w) s += v;
  if (s == 0) w[0] = 1.0;
  return sizeseg::CategoricalDist::normalized(w);
}

// Checks the logit gradient of a loss on a field against central differences.
template <typename LossFn>
sizeseg::GradCheckResult check_field_gradient(int h, int w, int k, const std::vector<double>& logits, LossFn fn,
                                              double step = 1e-5) {
  sizeseg::PredictionField field(h, w, k, logits);
  const sizeseg::LossValue analytic = fn(field);
  auto f = [&](std::span<const double> z) {
    return fn(sizeseg::PredictionField(h, w, k, std::vector<double>(z.begin(), z.end()))).value;
  };
  return sizeseg::check_gradient(f, logits, analytic.grad, step);
}

}  // namespace testutil
