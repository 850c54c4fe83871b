#pragma once

#include <span>

namespace oprm::ar {

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Ordinary least squares y = slope * x + intercept. R^2 is 1 when y is
/// constant and fitted exactly.
LinearFit fit_line(std::span<const double> x, std::span<const double> y);

/// Spearman rank correlation with average ranks for ties; 0 when either
/// side is constant.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace oprm::ar
