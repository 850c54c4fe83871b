#include "oprm/core/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "oprm/errors.hpp"

namespace oprm {

OutputDistribution::OutputDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw UsageError("empty distribution");
  double sum = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw UsageError("distribution entries must be finite and nonnegative");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw UsageError("distribution does not sum to 1");
}

OutputDistribution OutputDistribution::from_logits(std::span<const double> logits) {
  if (logits.empty()) throw UsageError("empty logits");
  const double mx = *std::max_element(logits.begin(), logits.end());
  if (!std::isfinite(mx)) throw NumericError("non-finite logits");
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) sum += (p[i] = std::exp(logits[i] - mx));
  for (double& x : p) x /= sum;
  return OutputDistribution(std::move(p));
}

TokenId OutputDistribution::argmax() const {
  return static_cast<TokenId>(std::max_element(probs_.begin(), probs_.end()) - probs_.begin());
}

}  // namespace oprm
