#pragma once

// Environment property checks shared by the unit tests and the acceptance
// run. Each returns an empty string on success and a description of the
// first violation otherwise.

#include <sstream>
#include <string>
#include <vector>

#include "iad/common/random.hpp"
#include "iad/env/game.hpp"
#include "iad/env/heuristic_agent.hpp"

namespace iad::testing {

inline env::Action random_env_action(Rng& rng) {
  return env::action_from_index(static_cast<int>(rng() % env::kNumActions));
}

// Plays `replays` seeded random-action episodes and compares every
// intermediate state digest with the first replay.
inline std::string replay_mismatch(const env::LayoutSpec& layout, std::uint64_t seed, int replays) {
  std::vector<std::uint64_t> reference;
  for (int replay = 0; replay < replays; ++replay) {
    Rng rng(seed);
    env::GameState s = env::reset(layout, seed);
    std::vector<std::uint64_t> digests;
    while (!s.done) {
      s = env::step(layout, s, random_env_action(rng), random_env_action(rng)).next;
      digests.push_back(env::state_digest(s));
    }
    if (replay == 0) {
      reference = digests;
    } else if (digests != reference) {
      return "replay " + std::to_string(replay) + " diverged from replay 0";
    }
  }
  return "";
}

// Item bookkeeping across `steps` steps, half uniformly random and half from
// a noisy heuristic so that soups actually get cooked and delivered.
inline std::string conservation_violation(const env::LayoutSpec& layout, std::uint64_t seed, int steps) {
  using env::EventKind;
  using env::Item;
  Rng rng(seed);
  env::HeuristicAgent noisy(0.3);
  env::GameState s = env::reset(layout);
  double extrinsic = 0.0;
  int deliveries = 0;
  auto count_items = [](const env::GameState& st, Item item) {
    int n = 0;
    for (const auto& p : st.players) n += p.held == item;
    for (Item c : st.counters) n += c == item;
    return n;
  };
  auto fail = [&](int i, const std::string& what) {
    std::ostringstream out;
    out << layout.name << " step " << i << ": " << what;
    return out.str();
  };
  for (int i = 0; i < steps; ++i) {
    if (s.done) s = env::reset(layout);
    const bool scripted = (i / 500) % 2 == 1;
    const env::Action a = scripted ? noisy.act(layout, s, env::kBlue, rng) : random_env_action(rng);
    const env::Action b = scripted ? noisy.act(layout, s, env::kGreen, rng) : random_env_action(rng);
    const env::StepResult r = env::step(layout, s, a, b);
    try {
      env::check_state(layout, r.next);
    } catch (const std::exception& e) {
      return fail(i, e.what());
    }
    if (r.next.t != s.t + 1) return fail(i, "t did not advance by one");
    int onion_pickups = 0, placed = 0, soups_taken = 0, delivered = 0, dish_pickups = 0;
    for (const env::Event& e : r.events) {
      onion_pickups += e.kind == EventKind::kOnionPickup;
      placed += e.kind == EventKind::kOnionPlaced;
      soups_taken += e.kind == EventKind::kSoupPickedUp;
      delivered += e.kind == EventKind::kSoupDelivered;
      dish_pickups += e.kind == EventKind::kDishPickup;
      if (e.kind == EventKind::kSoupPickedUp) {
        const env::PotState& before = s.pots[static_cast<std::size_t>(layout.pot_index(e.where))];
        if (!(before.ready || before.cook_timer == 1) || before.onions != layout.pot_capacity) {
          return fail(i, "soup taken from a pot that had not finished cooking");
        }
      }
    }
    if (count_items(r.next, Item::kOnion) != count_items(s, Item::kOnion) + onion_pickups - placed) {
      return fail(i, "onion count");
    }
    if (count_items(r.next, Item::kSoup) != count_items(s, Item::kSoup) + soups_taken - delivered) {
      return fail(i, "soup count");
    }
    if (count_items(r.next, Item::kDish) != count_items(s, Item::kDish) + dish_pickups - soups_taken) {
      return fail(i, "dish count");
    }
    if (r.reward_extrinsic != 0.0 && r.reward_extrinsic != 20.0) return fail(i, "extrinsic reward not 0 or 20");
    extrinsic += r.reward_extrinsic;
    deliveries += delivered;
    s = r.next;
  }
  if (extrinsic != 20.0 * deliveries) return layout.name + ": extrinsic total does not equal 20 per delivery";
  return "";
}

}  // namespace iad::testing
