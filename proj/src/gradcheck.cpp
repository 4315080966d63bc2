#include "sizeseg/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "sizeseg/errors.hpp"

namespace sizeseg {

std::vector<double> numeric_gradient(const ScalarFunction& f, std::span<const double> x, double h) {
  std::vector<double> point(x.begin(), x.end());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double saved = point[i];
    point[i] = saved + h;
    const double up = f(point);
    point[i] = saved - h;
    const double down = f(point);
    point[i] = saved;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

GradCheckResult compare_gradients(std::span<const double> analytic, std::span<const double> numeric) {
  if (analytic.size() != numeric.size()) throw DomainError("compare_gradients: size mismatch");
  GradCheckResult r;
  double scale = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    scale = std::max({scale, std::abs(analytic[i]), std::abs(numeric[i])});
    const double diff = std::abs(analytic[i] - numeric[i]);
    if (diff > r.max_abs_error || std::isnan(diff)) {
      r.max_abs_error = diff;
      r.worst_index = i;
    }
  }
  if (std::isnan(r.max_abs_error)) {
    r.max_rel_error = r.max_abs_error;
  } else if (scale > 0.0) {
    r.max_rel_error = r.max_abs_error / scale;
  }
  return r;
}

GradCheckResult check_gradient(const ScalarFunction& f, std::span<const double> x, std::span<const double> analytic,
                               double h) {
  const auto numeric = numeric_gradient(f, x, h);
  return compare_gradients(analytic, numeric);
}

}  // namespace sizeseg
