#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "iad/common/random.hpp"
#include "iad/env/game.hpp"
#include "iad/policy/hierarchical_policy.hpp"

namespace iad::core {

// A maximal run of timesteps with one active skill.
struct SkillSegment {
  int start = 0;
  int length = 0;
  int skill = 0;
  double segment_return = 0.0;  // sum of gamma^(t - start) * task reward
  double log_prob_skill = 0.0;
  double v_hi = 0.0;
  // True when the segment ended through a termination draw rather than the
  // episode horizon.
  bool closed_by_termination = false;
};

// Everything recorded for one learner seat over one episode. Per-step vectors
// all have `length` entries; `obs` holds length * obs_size values.
struct Track {
  int env = 0;
  int seat = 0;
  int partner = -1;  // index into the partner pool, -1 in self-play
  std::size_t length = 0;
  std::vector<double> obs;
  std::vector<int> skill;
  std::vector<int> action;
  std::vector<std::uint8_t> skill_new;
  // Termination draw of the previous skill taken at this step.
  std::vector<std::uint8_t> has_termination;
  std::vector<std::uint8_t> terminated;
  std::vector<double> beta;
  std::vector<double> log_prob_action;
  std::vector<double> log_prob_skill;
  std::vector<double> v_lo;
  std::vector<double> v_hi;
  std::vector<double> reward_extrinsic;
  std::vector<double> reward_shaped;
  std::vector<double> reward_iad;
  std::vector<double> reward_bonus;
  // Low-level training reward: extrinsic + shaped + tau * r_iad + bonus.
  std::vector<double> reward;
  // Recurrent state at the start of every `chunk`-step window.
  std::vector<std::vector<double>> chunk_hidden;
  std::vector<std::vector<double>> chunk_cell;
  std::vector<SkillSegment> segments;

  double task_return() const;  // extrinsic + shaped
  double extrinsic_return() const;
};

struct RolloutBuffers {
  std::vector<Track> tracks;
  std::size_t chunk = 64;
  std::int64_t env_steps = 0;
  double tau = 0.0;

  std::size_t transition_count() const;
  std::size_t segment_count() const;
};

// Splits a filled track into skill segments and their discounted returns.
std::vector<SkillSegment> build_segments(const Track& track, double gamma);

// Frozen partner policies sampled uniformly per episode.
struct Partner {
  std::string id;
  std::shared_ptr<const policy::HierarchicalPolicy> policy;
};

struct PartnerPool {
  std::vector<Partner> partners;
  bool empty() const { return partners.empty(); }
  std::size_t size() const { return partners.size(); }
};

struct RolloutSettings {
  const env::LayoutSpec* layout = nullptr;  // horizon taken from here
  int n_envs = 1;
  bool self_play = true;  // both seats are learner seats
  double tau = 0.0;
  double gamma = 0.99;
  std::size_t chunk = 64;
  bool compute_intrinsic = true;
  policy::TerminationOverride termination = policy::TerminationOverride::kLearned;
  double jsd_weight = 0.0;
  std::vector<const policy::HierarchicalPolicy*> jsd_references;
};

// Independent random streams, so changing how one consumer draws never shifts
// another.
struct RolloutRngs {
  Rng skill;
  Rng action;
  Rng partner_choice;
  Rng partner;

  static RolloutRngs from_seed(std::uint64_t seed);
};

// Runs one whole episode in each of `n_envs` environments. Outside self-play
// the learner sits in seat (env + episode_index) % 2 and the other seat is a
// partner drawn from `partners`. Intrinsic rewards use the policy as it is
// during collection and are stored, not recomputed later.
RolloutBuffers collect_rollout(const policy::HierarchicalPolicy& learner, const PartnerPool& partners,
                               const RolloutSettings& settings, RolloutRngs& rngs,
                               std::uint64_t episode_index);

}  // namespace iad::core
