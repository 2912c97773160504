#pragma once

#include <cstdint>
#include <vector>

#include "iad/grad/parameters.hpp"

namespace iad::grad {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First/second moments mirror the parameter shapes, in ParameterSet order.
struct AdamState {
  AdamConfig config;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::int64_t t = 0;

  static AdamState for_parameters(const ParameterSet& params, AdamConfig config = {});
};

// Applies one bias-corrected Adam update using the gradients currently held by
// `params`. A parameter without a gradient is treated as zero gradient.
// Throws NumericError (leaving params and state untouched) if any gradient
// component is non-finite.
void adam_step(ParameterSet& params, AdamState& state, double lr);

}  // namespace iad::grad
