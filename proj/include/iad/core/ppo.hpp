#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "iad/common/random.hpp"
#include "iad/core/config.hpp"
#include "iad/core/rollout.hpp"
#include "iad/grad/adam.hpp"
#include "iad/policy/hierarchical_policy.hpp"

namespace iad::core {

// Per-track advantages and value targets. Low-level entries are per timestep,
// high-level entries per segment.
struct AdvantageSet {
  std::vector<std::vector<double>> lo_adv;
  std::vector<std::vector<double>> lo_ret;
  std::vector<std::vector<double>> hi_adv;
  std::vector<std::vector<double>> hi_ret;
  // Raw high-level advantages min-max scaled to [0, 1] over the batch (0.5
  // everywhere when they are all equal); targets of the termination loss.
  std::vector<std::vector<double>> hi_unit;
};

// Runs gae_low on every track and, when `high_level` is set, gae_high on its
// segments. Episodes end at the horizon, so nothing is bootstrapped past it.
AdvantageSet compute_advantages(const RolloutBuffers& buffers, const HyperParams& hp,
                                bool high_level);

struct UpdateSettings {
  HyperParams hp;
  // Include the manager, its value and the termination head. Off for flat
  // PPO and for a single skill, where the manager has nothing to choose.
  bool high_level = true;
  double lr = 1e-3;
  double entropy_coef = 0.0;
};

struct UpdateStats {
  double policy_loss_lo = 0.0;
  double value_loss_lo = 0.0;
  double entropy_lo = 0.0;
  double policy_loss_hi = 0.0;
  double value_loss_hi = 0.0;
  double entropy_hi = 0.0;
  double termination_loss = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  double grad_norm = 0.0;
  int minibatches = 0;
  int aborted_epochs = 0;
  std::string diagnostic;

  nlohmann::json to_json() const;
};

// Clipped surrogate of a single sample: min(rho A, clip(rho, 1-eps, 1+eps) A).
double clipped_surrogate(double ratio, double advantage, double clip);

// E epochs over minibatches of `minibatch_steps` consecutive timesteps from
// `minibatch_envs` tracks, each starting from the recurrent state stored at
// collection time. One Adam step per minibatch. A non-finite loss or gradient
// abandons the rest of that epoch and is reported in the stats.
UpdateStats ppo_update(policy::HierarchicalPolicy& policy, const RolloutBuffers& buffers,
                       const AdvantageSet& advantages, const UpdateSettings& settings,
                       grad::AdamState& adam, Rng& shuffle_rng);

}  // namespace iad::core
