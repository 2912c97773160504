#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "iad/common/random.hpp"
#include "iad/grad/layers.hpp"
#include "iad/grad/parameters.hpp"
#include "iad/grad/tensor.hpp"

namespace iad::policy {

using grad::Tensor;

struct PolicyConfig {
  int num_skills = 6;
  int num_actions = 6;
  int obs_channels = 28;
  int height = 0;
  int width = 0;
  std::vector<int> conv_channels = {16, 16, 16};
  int kernel = 3;
  std::vector<int> dense = {64, 64};
  int recurrent = 64;
  grad::CellKind cell = grad::CellKind::kLstm;

  nlohmann::json to_json() const;
  static PolicyConfig from_json(const nlohmann::json& j);
  std::size_t obs_size() const {
    return static_cast<std::size_t>(obs_channels * height * width);
  }
  bool operator==(const PolicyConfig&) const = default;
};

// Recurrent state for a batch of B environment rows.
struct RecurrentState {
  Tensor hidden;  // (B, R)
  Tensor cell;    // (B, R); undefined for GRU
  std::size_t batch() const { return hidden.defined() ? hidden.dim(0) : 0; }
};

// Head outputs for N = T * B rows (time-major: row t * B + b).
struct PolicyOutputs {
  Tensor skill_logits;        // (N, Z)
  Tensor v_hi;                // (N, 1)
  Tensor action_base_logits;  // (N, A); add the skill row to condition on z
  Tensor v_lo;                // (N, 1)
  Tensor termination_logits;  // (N, Z); beta(z, s) = sigmoid of column z
  RecurrentState final_state;
};

enum class TerminationOverride { kLearned, kNever, kAlways };

// Per-row carry across act() calls.
struct SkillCarry {
  std::optional<int> skill;  // empty at episode start
};

struct StepDecision {
  int skill = 0;
  bool skill_is_new = false;
  int action = 0;
  double log_prob_action = 0.0;
  double log_prob_skill = 0.0;  // of the active skill under the current state
  // Termination of the previous skill evaluated at this state; only valid
  // when a previous skill existed.
  bool has_termination = false;
  double beta = 0.0;
  bool terminated = false;
  double v_hi = 0.0;
  double v_lo = 0.0;
  std::vector<double> skill_probs;   // Z
  std::vector<double> action_probs;  // Z x A, row-major, when requested
};

// pi = (pi_hi, pi_lo, beta) on a shared conv -> dense -> recurrent backbone.
class HierarchicalPolicy {
 public:
  HierarchicalPolicy(const PolicyConfig& config, std::uint64_t seed);
  // Layers hold handles into the parameter set, so copies would alias it.
  HierarchicalPolicy(const HierarchicalPolicy&) = delete;
  HierarchicalPolicy& operator=(const HierarchicalPolicy&) = delete;
  HierarchicalPolicy(HierarchicalPolicy&&) = default;
  HierarchicalPolicy& operator=(HierarchicalPolicy&&) = default;

  // Independent deep copy of the parameters.
  HierarchicalPolicy clone() const;

  const PolicyConfig& config() const { return config_; }
  grad::ParameterSet& parameters() { return params_; }
  const grad::ParameterSet& parameters() const { return params_; }

  RecurrentState initial_state(std::size_t batch) const;

  // `obs` holds T * B observations in C x H x W order, time-major.
  PolicyOutputs forward_sequence(std::span<const double> obs, std::size_t steps,
                                 std::size_t batch, const RecurrentState& state) const;
  PolicyOutputs forward(std::span<const double> obs, std::size_t batch,
                        const RecurrentState& state) const {
    return forward_sequence(obs, 1, batch, state);
  }

  // (N, A) logits conditioned on one skill per row. Throws on out-of-range z.
  Tensor action_logits(const PolicyOutputs& out, std::span<const std::size_t> skills) const;
  // (N) log beta(z, s) and log(1 - beta(z, s)) for one skill per row.
  Tensor log_beta(const PolicyOutputs& out, std::span<const std::size_t> skills) const;
  Tensor log_one_minus_beta(const PolicyOutputs& out, std::span<const std::size_t> skills) const;

  // pi_lo(.|s, z) for every z (Z x A row-major) and pi_hi(.|s) for row `row`.
  void all_skill_action_dists(const PolicyOutputs& out, std::size_t row,
                              std::vector<double>* action_probs,
                              std::vector<double>* skill_probs) const;

  // One environment step for B rows without recording a graph. Updates
  // `state` and `carry` in place. Skill and termination draws use
  // `skill_rng`, action draws `action_rng`.
  std::vector<StepDecision> act(std::span<const double> obs, RecurrentState& state,
                                std::vector<SkillCarry>& carry, Rng& skill_rng, Rng& action_rng,
                                TerminationOverride termination = TerminationOverride::kLearned,
                                bool with_action_probs = false) const;

  std::size_t num_skills() const { return static_cast<std::size_t>(config_.num_skills); }
  std::size_t num_actions() const { return static_cast<std::size_t>(config_.num_actions); }

 private:
  PolicyConfig config_;
  grad::ParameterSet params_;
  std::vector<grad::Conv2d> convs_;
  std::vector<grad::Dense> dense_;
  grad::RecurrentCell cell_;
  grad::Dense skill_head_;
  grad::Dense value_hi_head_;
  grad::Dense action_head_;
  Tensor skill_action_table_;  // (Z, A)
  grad::Dense value_lo_head_;
  grad::Dense termination_head_;
};

// Checkpoint with a policy manifest (`<path>.json`) recording the config.
std::string save_policy(const std::filesystem::path& path, const HierarchicalPolicy& policy,
                        const nlohmann::json& extra_metadata = nlohmann::json::object());
HierarchicalPolicy load_policy(const std::filesystem::path& path,
                               nlohmann::json* metadata = nullptr);

// Throws ConfigError naming the mismatch when the policy cannot read
// observations of the given shape.
void check_compatible(const PolicyConfig& config, int obs_channels, int height, int width);

}  // namespace iad::policy
