#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace sizeseg {

using ScalarFunction = std::function<double(std::span<const double>)>;

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every coordinate.
std::vector<double> numeric_gradient(const ScalarFunction& f, std::span<const double> x, double h = 1e-5);

struct GradCheckResult {
  /// max_i |a_i - n_i| / max(|a|_inf, |n|_inf); 0 when both gradients vanish.
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t worst_index = 0;

  bool passes(double tol) const { return max_rel_error < tol; }
};

GradCheckResult compare_gradients(std::span<const double> analytic, std::span<const double> numeric);

GradCheckResult check_gradient(const ScalarFunction& f, std::span<const double> x, std::span<const double> analytic,
                               double h = 1e-5);

}  // namespace sizeseg
