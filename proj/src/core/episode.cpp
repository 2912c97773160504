#include "iad/core/episode.hpp"

#include <cmath>

#include "iad/common/error.hpp"
#include "iad/env/observation.hpp"

namespace iad::core {

env::Action RandomActor::act(const env::LayoutSpec&, const env::GameState&, int) {
  return env::action_from_index(static_cast<int>(uniform_index(rng_, env::kNumActions)));
}

env::Action HeuristicActor::act(const env::LayoutSpec& layout, const env::GameState& state,
                                int seat) {
  return agent_.act(layout, state, seat, rng_);
}

PolicyActor::PolicyActor(std::shared_ptr<const policy::HierarchicalPolicy> policy,
                         std::uint64_t seed, policy::TerminationOverride termination)
    : policy_(std::move(policy)),
      termination_(termination),
      skill_rng_(derive_seed(seed, 1)),
      action_rng_(derive_seed(seed, 2)) {
  reset();
}

void PolicyActor::reset() {
  state_ = policy_->initial_state(1);
  carry_.assign(1, {});
  last_ = {};
}

env::Action PolicyActor::act(const env::LayoutSpec& layout, const env::GameState& state, int seat) {
  obs_ = env::encode_observation(layout, state, seat);
  last_ = policy_->act(obs_, state_, carry_, skill_rng_, action_rng_, termination_).front();
  return env::action_from_index(last_.action);
}

EpisodeRecord play_episode(const env::LayoutSpec& layout, Actor& blue, Actor& green) {
  EpisodeRecord rec;
  blue.reset();
  green.reset();
  env::GameState state = env::reset(layout);
  Actor* actors[2] = {&blue, &green};
  while (!state.done) {
    env::Action chosen[2];
    for (int seat = 0; seat < 2; ++seat) {
      chosen[seat] = actors[seat]->act(layout, state, seat);
      rec.actions[seat].push_back(chosen[seat]);
      rec.skills[seat].push_back(actors[seat]->active_skill());
      rec.skill_new[seat].push_back(actors[seat]->skill_is_new() ? 1 : 0);
    }
    env::StepResult res = env::step(layout, state, chosen[0], chosen[1]);
    rec.extrinsic += res.reward_extrinsic;
    rec.shaped += res.reward_shaped;
    for (const env::Event& e : res.events) rec.deliveries += e.kind == env::EventKind::kSoupDelivered;
    state = std::move(res.next);
  }
  return rec;
}

ReturnStats summarize_returns(std::vector<double> returns, std::vector<double> extrinsic) {
  ReturnStats s;
  s.returns = std::move(returns);
  s.extrinsic = std::move(extrinsic);
  const double n = static_cast<double>(s.returns.size());
  if (n == 0) return s;
  for (double r : s.returns) s.mean += r / n;
  for (double r : s.extrinsic) s.mean_extrinsic += r / n;
  double var = 0.0;
  for (double r : s.returns) var += (r - s.mean) * (r - s.mean);
  s.stddev = n > 1 ? std::sqrt(var / (n - 1)) : 0.0;
  s.standard_error = s.stddev / std::sqrt(n);
  return s;
}

ReturnStats evaluate_pair(const env::LayoutSpec& layout, const ActorFactory& a,
                          const ActorFactory& b, int episodes, std::uint64_t seed) {
  if (episodes < 1) throw ConfigError("episodes must be >= 1");
  std::vector<double> returns, extrinsic;
  for (int ep = 0; ep < episodes; ++ep) {
    for (int a_seat = 0; a_seat < 2; ++a_seat) {
      const std::uint64_t episode_seed = derive_seed(seed, static_cast<std::uint64_t>(2 * ep + a_seat));
      auto actor_a = a(derive_seed(episode_seed, 1));
      auto actor_b = b(derive_seed(episode_seed, 2));
      const EpisodeRecord rec = a_seat == 0 ? play_episode(layout, *actor_a, *actor_b)
                                            : play_episode(layout, *actor_b, *actor_a);
      returns.push_back(rec.task_return());
      extrinsic.push_back(rec.extrinsic);
    }
  }
  return summarize_returns(std::move(returns), std::move(extrinsic));
}

ReturnStats random_baseline(const env::LayoutSpec& layout, int episodes, std::uint64_t seed) {
  const ActorFactory random = [](std::uint64_t s) { return std::make_unique<RandomActor>(s); };
  return evaluate_pair(layout, random, random, episodes, seed);
}

ActorFactory policy_factory(std::shared_ptr<const policy::HierarchicalPolicy> policy,
                            policy::TerminationOverride termination) {
  return [policy, termination](std::uint64_t seed) {
    return std::make_unique<PolicyActor>(policy, seed, termination);
  };
}

}  // namespace iad::core
