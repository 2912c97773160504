#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "iad/core/schedules.hpp"
#include "iad/grad/layers.hpp"
#include "iad/policy/hierarchical_policy.hpp"

namespace iad::core {

enum class TrainMode { kIad, kFlat };
std::string train_mode_name(TrainMode mode);
TrainMode parse_train_mode(const std::string& text);

// kCrossEntropy: -[A log beta + (1 - A) log(1 - beta)] with A the segment's
// high-level advantage min-max scaled to [0, 1] over the batch.
// kPolicyGradient: -A log p(b) of the recorded draw b, A normalized.
enum class TerminationLoss { kCrossEntropy, kPolicyGradient };
std::string termination_loss_name(TerminationLoss loss);
TerminationLoss parse_termination_loss(const std::string& text);

std::string termination_override_name(policy::TerminationOverride mode);
policy::TerminationOverride parse_termination_override(const std::string& text);

struct HyperParams {
  double gamma = 0.99;
  double gae_lambda = 0.98;
  double clip = 0.05;
  double value_coef = 0.5;
  LinearSchedule entropy = kEntropySchedule;
  LinearSchedule tau = kTauSchedule;
  // Empty means the layout's table entry.
  std::optional<LearningRate> lr;
  int epochs = 4;
  int minibatch_steps = 64;  // time window per environment
  int minibatch_envs = 0;    // environments per minibatch; 0 means all
  int n_envs = 30;
  int horizon = 0;  // 0 means the layout's horizon
  std::int64_t total_steps = 10'000'000;
  double max_grad_norm = 10.0;  // 0 disables clipping
  bool normalize_advantages = true;
  TerminationLoss termination_loss = TerminationLoss::kCrossEntropy;

  void validate() const;
};

struct TrainConfig {
  std::string layout = "cramped_room_mini";  // shipped name or path
  std::filesystem::path layouts_dir = "layouts";
  TrainMode mode = TrainMode::kIad;
  int num_skills = 6;
  HyperParams hp;
  std::vector<int> conv_channels = {16, 16, 16};
  std::vector<int> dense = {64, 64};
  int recurrent = 64;
  grad::CellKind cell = grad::CellKind::kLstm;
  // "self_play" or a population manifest path.
  std::string partners = "self_play";
  std::uint64_t seed = 0;
  // Style-diversity bonus against frozen reference policies.
  double jsd_weight = 0.0;
  std::vector<std::string> jsd_references;
  policy::TerminationOverride termination_override = policy::TerminationOverride::kLearned;
  // Stop once the mean training return over the last `stop_window` updates
  // reaches this value; 0 disables.
  double stop_at_return = 0.0;
  int stop_window = 3;
  int checkpoint_every = 0;  // updates; 0 disables periodic checkpoints

  bool self_play() const { return partners == "self_play"; }
  policy::PolicyConfig policy_config(int channels, int height, int width) const;
  void validate() const;

  // Human-editable `key = value` form; every field has a key.
  std::string to_key_values() const;
  nlohmann::json to_json() const;
};

// Applies one `key = value` setting. Throws ConfigError on an unknown key or
// a bad value.
void apply_setting(TrainConfig& config, const std::string& key, const std::string& value);

TrainConfig parse_train_config(const std::string& text, const std::string& source = "config");
TrainConfig load_train_config(const std::filesystem::path& path);

}  // namespace iad::core
