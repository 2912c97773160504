#include "iad/core/gae.hpp"

#include <string>

#include "iad/common/error.hpp"

namespace iad::core {

GaeResult generalized_advantages(std::span<const double> rewards, std::span<const double> values,
                                 std::span<const std::uint8_t> dones, double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n + 1 || dones.size() != n) {
    throw ContractViolation("gae: " + std::to_string(n) + " rewards need " +
                            std::to_string(n + 1) + " values and " + std::to_string(n) +
                            " done flags, got " + std::to_string(values.size()) + " and " +
                            std::to_string(dones.size()));
  }
  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double running = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const double live = dones[i] ? 0.0 : 1.0;
    const double delta = rewards[i] + gamma * values[i + 1] * live - values[i];
    running = delta + gamma * lambda * live * running;
    out.advantages[i] = running;
    out.returns[i] = running + values[i];
  }
  return out;
}

}  // namespace iad::core
