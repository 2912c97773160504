#pragma once

#include "iad/common/random.hpp"
#include "iad/env/game.hpp"

namespace iad::env {

// Scripted greedy player: picks the next useful interaction target from the
// held item and pot states, walks there along a shortest path, turns to face
// it and interacts. With probability `epsilon` it takes a uniformly random
// action instead. Used as a stand-in human, for BC data and in tests.
class HeuristicAgent {
 public:
  explicit HeuristicAgent(double epsilon = 0.0) : epsilon_(epsilon) {}

  Action act(const LayoutSpec& layout, const GameState& state, int player, Rng& rng) const;
  // The greedy choice without noise.
  Action greedy(const LayoutSpec& layout, const GameState& state, int player) const;

 private:
  double epsilon_;
};

}  // namespace iad::env
