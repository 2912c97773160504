#include "iad/grad/categorical.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "iad/common/error.hpp"

namespace iad::grad {

Categorical::Categorical(std::span<const double> logits) {
  if (logits.empty()) throw ContractViolation("categorical: no logits");
  for (double l : logits) {
    if (!std::isfinite(l)) throw ContractViolation("categorical: non-finite logit");
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double l : logits) total += std::exp(l - mx);
  const double lse = mx + std::log(total);
  probs_.resize(logits.size());
  log_probs_.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    log_probs_[i] = logits[i] - lse;
    probs_[i] = std::exp(log_probs_[i]);
  }
}

Categorical Categorical::from_probabilities(std::span<const double> probabilities) {
  if (probabilities.empty()) throw ContractViolation("categorical: no probabilities");
  Categorical dist;
  double total = 0.0;
  for (double p : probabilities) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw ContractViolation("categorical: invalid probability");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-6) throw ContractViolation("categorical: probabilities do not sum to 1");
  dist.probs_.assign(probabilities.begin(), probabilities.end());
  for (double p : dist.probs_) {
    dist.log_probs_.push_back(p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity());
  }
  return dist;
}

double Categorical::log_prob(std::size_t index) const {
  if (index >= probs_.size()) throw ContractViolation("categorical: index out of range");
  return log_probs_[index];
}

double Categorical::entropy() const {
  double h = 0.0;
  for (std::size_t i = 0; i < probs_.size(); ++i) {
    if (probs_[i] > 0.0) h -= probs_[i] * log_probs_[i];
  }
  return h;
}

std::size_t Categorical::sample(Rng& rng) const {
  const double u = uniform01(rng);
  double cumulative = 0.0;
  for (std::size_t i = 0; i < probs_.size(); ++i) {
    cumulative += probs_[i];
    if (u < cumulative) return i;
  }
  // rounding left u above the final cumulative sum; take the last non-zero
  for (std::size_t i = probs_.size(); i-- > 0;) {
    if (probs_[i] > 0.0) return i;
  }
  return probs_.size() - 1;
}

std::size_t Categorical::argmax() const {
  return static_cast<std::size_t>(
      std::max_element(probs_.begin(), probs_.end()) - probs_.begin());
}

}  // namespace iad::grad
