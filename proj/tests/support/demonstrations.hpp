#pragma once

#include <optional>
#include <vector>

#include "iad/common/random.hpp"
#include "iad/env/game.hpp"
#include "iad/env/heuristic_agent.hpp"
#include "iad/env/trajectory.hpp"

namespace iad::testing {

// A recorded session with the heuristic agent standing in for the human in
// seat 0 and a noisier heuristic partner in seat 1. `episodes` full episodes.
inline std::vector<env::TrajectoryRecord> heuristic_session(const env::LayoutSpec& layout,
                                                            int episodes, std::uint64_t seed,
                                                            double human_epsilon = 0.1,
                                                            double partner_epsilon = 0.3) {
  const env::HeuristicAgent human(human_epsilon), partner(partner_epsilon);
  Rng rng(seed);
  std::vector<env::TrajectoryRecord> records;
  for (int ep = 0; ep < episodes; ++ep) {
    env::GameState state = env::reset(layout);
    while (!state.done) {
      const std::array<env::Action, 2> actions = {human.act(layout, state, 0, rng),
                                                  partner.act(layout, state, 1, rng)};
      env::StepResult res = env::step(layout, state, actions[0], actions[1]);
      records.push_back(env::make_record(layout, state, actions, res, 0));
      state = res.next;
    }
  }
  return records;
}

}  // namespace iad::testing
