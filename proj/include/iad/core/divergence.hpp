#pragma once

#include <span>
#include <vector>

namespace iad::core {

// Probabilities below this are clamped when taking logs of the marginal.
inline constexpr double kProbabilityFloor = 1e-12;

// Mixture of the skill-conditioned action distributions weighted by the skill
// distribution. `conditionals` is |Z| x |A| row-major. Throws
// ContractViolation when an input is not normalized to within 1e-6.
std::vector<double> marginal_action_dist(std::span<const double> skill_dist,
                                         std::span<const double> conditionals);

// KL(p || q) in nats with 0 log 0 = 0 and q clamped at kProbabilityFloor.
double kl_divergence(std::span<const double> p, std::span<const double> q);

// KL between the active skill's action distribution and the marginal.
double intrinsic_reward(int skill, std::span<const double> skill_dist,
                        std::span<const double> conditionals);

// Generalized Jensen-Shannon divergence of equally weighted distributions:
// H(mean) - mean(H). Each entry of `dists` has the same length.
double js_divergence(const std::vector<std::span<const double>>& dists);

}  // namespace iad::core
