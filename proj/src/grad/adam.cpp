#include "iad/grad/adam.hpp"

#include <cmath>

#include "iad/common/error.hpp"

namespace iad::grad {

AdamState AdamState::for_parameters(const ParameterSet& params, AdamConfig config) {
  AdamState state;
  state.config = config;
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m.emplace_back(params[i].numel(), 0.0);
    state.v.emplace_back(params[i].numel(), 0.0);
  }
  return state;
}

void adam_step(ParameterSet& params, AdamState& state, double lr) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ContractViolation("adam: state covers " + std::to_string(state.m.size()) +
                            " parameters, set has " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& p = params[i];
    if (state.m[i].size() != p.numel() || state.v[i].size() != p.numel()) {
      throw ContractViolation("adam: moment shape mismatch for " + params.name(i));
    }
    for (double g : p.grad()) {
      if (!std::isfinite(g)) {
        throw NumericError("adam: non-finite gradient in " + params.name(i) +
                           "; update aborted");
      }
    }
  }

  const AdamConfig& c = state.config;
  state.t += 1;
  const double correction1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
  const double correction2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    const auto grad = p.grad();
    if (grad.empty()) continue;  // zero gradient leaves m, v decaying toward 0 from 0
    auto data = p.mutable_data();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < data.size(); ++j) {
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * grad[j];
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * grad[j] * grad[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      data[j] -= lr * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
}

}  // namespace iad::grad
