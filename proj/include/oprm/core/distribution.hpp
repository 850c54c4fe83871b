#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "oprm/core/vocab.hpp"

namespace oprm {

/// Normalized next-token distribution over the vocabulary.
class OutputDistribution {
 public:
  OutputDistribution() = default;
  /// Takes ownership of `probs`; throws UsageError unless entries are
  /// nonnegative and sum to 1 within 1e-6.
  explicit OutputDistribution(std::vector<double> probs);

  /// Numerically stable normalizing exponential of `logits`.
  static OutputDistribution from_logits(std::span<const double> logits);

  std::size_t size() const { return probs_.size(); }
  double operator[](TokenId t) const { return probs_[static_cast<std::size_t>(t)]; }
  std::span<const double> probs() const { return probs_; }

  /// Most likely token; lowest id on ties.
  TokenId argmax() const;

  bool operator==(const OutputDistribution&) const = default;

 private:
  std::vector<double> probs_;
};

}  // namespace oprm
