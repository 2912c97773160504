#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <vector>

#include <json.hpp>

#include "iad/core/config.hpp"
#include "iad/core/ppo.hpp"
#include "iad/core/rollout.hpp"
#include "iad/env/layout.hpp"
#include "iad/grad/adam.hpp"
#include "iad/policy/hierarchical_policy.hpp"

namespace iad::core {

struct UpdateMetrics {
  int update = 0;
  std::int64_t steps = 0;  // environment steps after this update
  double tau = 0.0;
  double lr = 0.0;
  double entropy_coef = 0.0;
  double mean_return = 0.0;  // extrinsic + shaped per episode
  double return_std = 0.0;
  double mean_extrinsic = 0.0;
  double mean_intrinsic = 0.0;  // per step
  double mean_bonus = 0.0;      // per step
  std::vector<std::int64_t> skill_counts;
  double mean_segment_length = 0.0;
  int min_segment_length = 0;
  int max_segment_length = 0;
  double segments_per_episode = 0.0;
  UpdateStats losses;
  double seconds = 0.0;

  nlohmann::json to_json() const;
};

using PolicyPtr = std::shared_ptr<const policy::HierarchicalPolicy>;

// Alternates collect_rollout and ppo_update under the configured schedules.
// Deterministic for a given config seed; save_state/load_state capture
// everything needed to continue a run exactly.
class Trainer {
 public:
  explicit Trainer(TrainConfig config, PartnerPool partners = {},
                   std::vector<PolicyPtr> jsd_references = {});

  UpdateMetrics run_update();
  bool finished() const;

  const TrainConfig& config() const { return config_; }
  const env::LayoutSpec& layout() const { return layout_; }
  const policy::HierarchicalPolicy& policy() const { return policy_; }
  policy::HierarchicalPolicy& mutable_policy() { return policy_; }
  std::int64_t steps_done() const { return steps_; }
  int updates_done() const { return updates_; }
  bool stopped_early() const { return stopped_early_; }

  double tau_now() const;
  double lr_now() const;
  double entropy_now() const;
  LearningRate learning_rate() const { return lr_; }

  void save_state(const std::filesystem::path& path) const;
  // Throws ConfigError if the saved run used a different policy shape.
  void load_state(const std::filesystem::path& path);

 private:
  RolloutSettings rollout_settings() const;

  TrainConfig config_;
  env::LayoutSpec layout_;
  PartnerPool partners_;
  std::vector<PolicyPtr> jsd_references_;
  policy::HierarchicalPolicy policy_;
  grad::AdamState adam_;
  LearningRate lr_;
  RolloutRngs rngs_;
  Rng shuffle_rng_;
  std::int64_t steps_ = 0;
  int updates_ = 0;
  std::uint64_t episodes_ = 0;  // rollout index; sets the learner's seat
  std::deque<double> recent_returns_;
  bool stopped_early_ = false;
};

struct TrainRunOptions {
  std::filesystem::path out_dir;
  bool force = false;
  bool resume = false;
  int max_updates = -1;  // stop after this many updates in this call; -1 = no limit
  std::function<void(const UpdateMetrics&)> on_update;
};

struct TrainRunResult {
  std::vector<UpdateMetrics> metrics;  // updates run by this call
  std::filesystem::path policy_path;
  std::filesystem::path state_path;
};

// Runs a trainer to completion, writing under `out_dir`:
//   config.kv, metrics.jsonl (one record per update), state.ckpt (resume
//   state), policy.ckpt (final policy) and checkpoints/ when periodic
//   checkpoints are enabled. With `resume`, state.ckpt is loaded first and
//   metrics continue from the saved update.
TrainRunResult run_training(Trainer& trainer, const TrainRunOptions& options);

}  // namespace iad::core
