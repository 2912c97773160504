#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "iad/common/random.hpp"
#include "iad/env/game.hpp"
#include "iad/env/heuristic_agent.hpp"
#include "iad/policy/hierarchical_policy.hpp"

namespace iad::core {

// Controls one seat, one step at a time.
class Actor {
 public:
  virtual ~Actor() = default;
  virtual void reset() = 0;
  virtual env::Action act(const env::LayoutSpec& layout, const env::GameState& state, int seat) = 0;
  // Skill behind the last action, -1 for actors without skills.
  virtual int active_skill() const { return -1; }
  virtual bool skill_is_new() const { return false; }
};

class RandomActor : public Actor {
 public:
  explicit RandomActor(std::uint64_t seed) : seed_(seed), rng_(seed) {}
  void reset() override {}
  env::Action act(const env::LayoutSpec& layout, const env::GameState& state, int seat) override;

 private:
  std::uint64_t seed_;
  Rng rng_;
};

class HeuristicActor : public Actor {
 public:
  HeuristicActor(double epsilon, std::uint64_t seed) : agent_(epsilon), rng_(seed) {}
  void reset() override {}
  env::Action act(const env::LayoutSpec& layout, const env::GameState& state, int seat) override;

 private:
  env::HeuristicAgent agent_;
  Rng rng_;
};

// Samples from a policy with its own skill and action streams, exactly as
// HierarchicalPolicy::act does for a batch of one.
class PolicyActor : public Actor {
 public:
  PolicyActor(std::shared_ptr<const policy::HierarchicalPolicy> policy, std::uint64_t seed,
              policy::TerminationOverride termination = policy::TerminationOverride::kLearned);
  void reset() override;
  env::Action act(const env::LayoutSpec& layout, const env::GameState& state, int seat) override;
  int active_skill() const override { return last_.skill; }
  bool skill_is_new() const override { return last_.skill_is_new; }
  const policy::StepDecision& last_decision() const { return last_; }
  const std::vector<double>& last_observation() const { return obs_; }

 private:
  std::shared_ptr<const policy::HierarchicalPolicy> policy_;
  policy::TerminationOverride termination_;
  Rng skill_rng_;
  Rng action_rng_;
  policy::RecurrentState state_;
  std::vector<policy::SkillCarry> carry_;
  policy::StepDecision last_;
  std::vector<double> obs_;
};

struct EpisodeRecord {
  double extrinsic = 0.0;
  double shaped = 0.0;
  int deliveries = 0;
  std::vector<env::Action> actions[2];
  std::vector<int> skills[2];  // -1 for actors without skills
  std::vector<std::uint8_t> skill_new[2];

  double task_return() const { return extrinsic + shaped; }
};

// Plays one full episode from reset until the layout's horizon.
EpisodeRecord play_episode(const env::LayoutSpec& layout, Actor& blue, Actor& green);

struct ReturnStats {
  std::vector<double> returns;  // extrinsic + shaped per episode
  std::vector<double> extrinsic;
  double mean = 0.0;
  double stddev = 0.0;
  double standard_error = 0.0;
  double mean_extrinsic = 0.0;
};
ReturnStats summarize_returns(std::vector<double> returns, std::vector<double> extrinsic);

// `episodes` episodes with `a` as blue and as many with `a` as green. Actor
// factories receive a per-episode seed.
using ActorFactory = std::function<std::unique_ptr<Actor>(std::uint64_t seed)>;
ReturnStats evaluate_pair(const env::LayoutSpec& layout, const ActorFactory& a,
                          const ActorFactory& b, int episodes, std::uint64_t seed);

// Both seats uniformly random.
ReturnStats random_baseline(const env::LayoutSpec& layout, int episodes, std::uint64_t seed);

ActorFactory policy_factory(std::shared_ptr<const policy::HierarchicalPolicy> policy,
                            policy::TerminationOverride termination =
                                policy::TerminationOverride::kLearned);

}  // namespace iad::core
