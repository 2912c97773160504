#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "iad/common/random.hpp"

namespace iad::grad {

// Categorical distribution over {0, ..., n-1} parameterized by logits.
// Value type; no graph. Differentiable log-probabilities come from
// log_softmax in ops.hpp.
class Categorical {
 public:
  // Throws ContractViolation on empty or non-finite logits.
  explicit Categorical(std::span<const double> logits);

  static Categorical from_probabilities(std::span<const double> probabilities);

  std::size_t size() const { return probs_.size(); }
  const std::vector<double>& probabilities() const { return probs_; }
  const std::vector<double>& log_probabilities() const { return log_probs_; }
  double log_prob(std::size_t index) const;
  double entropy() const;
  // Inverse-CDF sampling with one uniform01 draw from `rng`.
  std::size_t sample(Rng& rng) const;
  std::size_t argmax() const;

 private:
  Categorical() = default;
  std::vector<double> probs_;
  std::vector<double> log_probs_;
};

}  // namespace iad::grad
