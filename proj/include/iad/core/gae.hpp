#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace iad::core {

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;  // advantages + values, the value-loss target
};

// A_t = sum_l (gamma * lambda)^l delta_{t+l}, with
// delta_t = r_t + gamma * V_{t+1} * (1 - done_t) - V_t. The trace is cut after
// every element with done_t set. `values` has one more entry than `rewards`:
// the bootstrap value after the last element.
GaeResult generalized_advantages(std::span<const double> rewards, std::span<const double> values,
                                 std::span<const std::uint8_t> dones, double gamma, double lambda);

// Low level: one element per timestep, rewards already combined with tau * r_iad.
inline GaeResult gae_low(std::span<const double> rewards, std::span<const double> values,
                         std::span<const std::uint8_t> dones, double gamma, double lambda) {
  return generalized_advantages(rewards, values, dones, gamma, lambda);
}

// High level: one element per skill segment; rewards are segment returns and
// discounting is per segment index, not per elapsed timestep.
inline GaeResult gae_high(std::span<const double> segment_returns, std::span<const double> values,
                          std::span<const std::uint8_t> dones, double gamma, double lambda) {
  return generalized_advantages(segment_returns, values, dones, gamma, lambda);
}

}  // namespace iad::core
