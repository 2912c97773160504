#include "iad/env/heuristic_agent.hpp"

#include <deque>
#include <functional>

namespace iad::env {

namespace {

using Goal = std::function<bool(Position)>;

constexpr Direction kDirections[4] = {Direction::kNorth, Direction::kEast, Direction::kSouth,
                                      Direction::kWest};

Action move_action(Direction d) {
  switch (d) {
    case Direction::kNorth: return Action::kUp;
    case Direction::kEast: return Action::kRight;
    case Direction::kSouth: return Action::kDown;
    case Direction::kWest: return Action::kLeft;
  }
  return Action::kStay;
}

struct Plan {
  bool found = false;
  Action action = Action::kStay;
  int distance = 0;
};

// Shortest path from `from` to a floor cell adjacent to any cell accepted by
// `is_goal`. Returns the first action along it, or the turn/interact at the
// end of it.
Plan plan_towards(const LayoutSpec& layout, Position from, Direction facing,
                  const Position* blocked, const Goal& is_goal) {
  const int n = layout.width * layout.height;
  std::vector<int> parent(n, -2);
  std::deque<Position> queue;
  auto idx = [&](Position p) { return p.y * layout.width + p.x; };
  parent[idx(from)] = -1;
  queue.push_back(from);
  while (!queue.empty()) {
    const Position cur = queue.front();
    queue.pop_front();
    for (Direction d : kDirections) {
      const Position target = offset(cur, d);
      if (!layout.is_floor(target) && is_goal(target)) {
        Plan plan{true, Action::kStay, 0};
        if (cur == from) {
          plan.action = facing == d ? Action::kInteract : move_action(d);
          return plan;
        }
        Position p = cur;
        ++plan.distance;
        while (parent[idx(p)] != idx(from)) {
          const int k = parent[idx(p)];
          p = {k % layout.width, k / layout.width};
          ++plan.distance;
        }
        for (Direction dd : kDirections) {
          if (offset(from, dd) == p) plan.action = move_action(dd);
        }
        return plan;
      }
    }
    for (Direction d : kDirections) {
      const Position next = offset(cur, d);
      if (!layout.is_floor(next) || parent[idx(next)] != -2) continue;
      if (blocked != nullptr && next == *blocked) continue;
      parent[idx(next)] = idx(cur);
      queue.push_back(next);
    }
  }
  return {};
}

Position move_target(const LayoutSpec& layout, const PlayerState& p, Action a) {
  Direction d;
  if (!action_direction(a, &d)) return p.position;
  const Position next = offset(p.position, d);
  return layout.is_floor(next) ? next : p.position;
}

// Next useful interaction target for `player`, or an empty goal to idle.
Goal choose_goal(const LayoutSpec& layout, const GameState& state, int player) {
  const PlayerState& me = state.players[player];
  const PlayerState& other = state.players[1 - player];

  auto reachable = [&](const Goal& g) {
    return plan_towards(layout, me.position, me.orientation, nullptr, g).found;
  };
  auto cell_is = [&layout](Cell c) -> Goal {
    return [&layout, c](Position p) { return layout.at(p) == c; };
  };
  auto counter_holds = [&layout, &state](Item item) -> Goal {
    return [&layout, &state, item](Position p) {
      const int i = layout.counter_index(p);
      return i >= 0 && state.counters[i] == item;
    };
  };
  auto pot_where = [&layout, &state](std::function<bool(const PotState&)> pred) -> Goal {
    return [&layout, &state, pred](Position p) {
      const int i = layout.pot_index(p);
      return i >= 0 && pred(state.pots[i]);
    };
  };
  const int capacity = layout.pot_capacity;
  auto needs_onion = [capacity](const PotState& pot) {
    return !pot.ready && pot.cook_timer < 0 && pot.onions < capacity;
  };
  auto first_reachable = [&](std::initializer_list<Goal> goals) -> Goal {
    for (const Goal& g : goals) {
      if (reachable(g)) return g;
    }
    return {};
  };

  switch (me.held) {
    case Item::kSoup:
      return first_reachable({cell_is(Cell::kServing), counter_holds(Item::kNone)});
    case Item::kDish:
      return first_reachable({pot_where([](const PotState& p) { return p.ready; }),
                              pot_where([](const PotState& p) { return p.cooking(); }),
                              pot_where([](const PotState& p) { return p.onions > 0; }),
                              cell_is(Cell::kPot), counter_holds(Item::kNone)});
    case Item::kOnion: {
      // Fill the fullest pot first so one soup starts cooking as early as possible.
      int best = -1;
      for (std::size_t i = 0; i < state.pots.size(); ++i) {
        if (needs_onion(state.pots[i]) &&
            reachable([&layout, i](Position p) { return p == layout.pots[i]; })) {
          best = std::max(best, state.pots[i].onions);
        }
      }
      if (best >= 0) {
        return pot_where([needs_onion, best](const PotState& p) {
          return needs_onion(p) && p.onions == best;
        });
      }
      if (!reachable(cell_is(Cell::kPot))) {
        int onions_on_counters = 0;
        for (Item item : state.counters) onions_on_counters += item == Item::kOnion;
        if (onions_on_counters < 2) return first_reachable({counter_holds(Item::kNone)});
      }
      return {};
    }
    case Item::kNone: {
      if (reachable(counter_holds(Item::kSoup))) return counter_holds(Item::kSoup);
      bool soup_coming = false;
      for (const PotState& pot : state.pots) soup_coming |= pot.ready || pot.cooking();
      bool dish_covered = other.held == Item::kDish || other.held == Item::kSoup;
      for (Item item : state.counters) dish_covered |= item == Item::kDish;
      const bool pot_reachable = reachable(cell_is(Cell::kPot));
      // Only the player nearer to a dish source fetches one (blue on ties).
      const Goal dish_source = [&layout, counter_holds](Position p) {
        return layout.at(p) == Cell::kDishDispenser || counter_holds(Item::kDish)(p);
      };
      const Plan mine = plan_towards(layout, me.position, me.orientation, nullptr, dish_source);
      if (other.held == Item::kNone && mine.found) {
        const Plan theirs =
            plan_towards(layout, other.position, other.orientation, nullptr, dish_source);
        if (theirs.found && (theirs.distance < mine.distance ||
                             (theirs.distance == mine.distance && player == kGreen))) {
          dish_covered = true;
        }
      }
      if (soup_coming && !dish_covered && reachable(cell_is(Cell::kDishDispenser))) {
        return cell_is(Cell::kDishDispenser);
      }
      if (soup_coming && pot_reachable && reachable(counter_holds(Item::kDish))) {
        return counter_holds(Item::kDish);
      }
      bool onion_needed = false;
      for (const PotState& pot : state.pots) onion_needed |= needs_onion(pot);
      if (onion_needed) {
        if (pot_reachable && reachable(counter_holds(Item::kOnion))) {
          return counter_holds(Item::kOnion);
        }
        if (reachable(cell_is(Cell::kOnionDispenser))) return cell_is(Cell::kOnionDispenser);
      }
      return {};
    }
  }
  return {};
}

Plan detour_plan(const LayoutSpec& layout, const PlayerState& me, const PlayerState& other,
                 const Goal& goal) {
  const Plan free = plan_towards(layout, me.position, me.orientation, nullptr, goal);
  Plan detour = plan_towards(layout, me.position, me.orientation, &other.position, goal);
  if (detour.found && detour.distance > free.distance + 2) detour.found = false;
  return detour;
}

}  // namespace

Action HeuristicAgent::act(const LayoutSpec& layout, const GameState& state, int player,
                           Rng& rng) const {
  if (epsilon_ > 0.0 && uniform01(rng) < epsilon_) {
    return action_from_index(static_cast<int>(rng() % kNumActions));
  }
  return greedy(layout, state, player);
}

Action HeuristicAgent::greedy(const LayoutSpec& layout, const GameState& state, int player) const {
  const PlayerState& blue = state.players[kBlue];
  const PlayerState& green = state.players[kGreen];
  auto desired = [&](int who, Goal* goal) {
    *goal = choose_goal(layout, state, who);
    if (!*goal) return Action::kStay;
    const PlayerState& p = state.players[who];
    return plan_towards(layout, p.position, p.orientation, nullptr, *goal).action;
  };

  // Blue follows its shortest path; when green stands on the next cell it
  // detours if that is cheap and otherwise waits.
  Goal blue_goal;
  const Action blue_desired = desired(kBlue, &blue_goal);
  Action blue_action = blue_desired;
  if (move_target(layout, blue, blue_desired) == green.position) {
    const Plan detour = detour_plan(layout, blue, green, blue_goal);
    blue_action = detour.found ? detour.action : Action::kStay;
  }
  if (player == kBlue) return blue_action;

  // Green yields: it never contests blue's next cell and steps aside when
  // blue wants to pass through it.
  Goal goal;
  const Action mine = desired(kGreen, &goal);
  const Position blue_target = move_target(layout, blue, blue_action);
  const Position my_target = move_target(layout, green, mine);
  const bool blocking_blue = move_target(layout, blue, blue_desired) == green.position &&
                             blue_action == Action::kStay;

  if (blocking_blue && (my_target == green.position || my_target == blue.position)) {
    for (Direction d : kDirections) {
      const Position aside = offset(green.position, d);
      if (layout.is_floor(aside) && !(aside == blue.position) && !(aside == blue_target)) {
        return move_action(d);
      }
    }
    return Action::kStay;
  }
  if (my_target == green.position) return mine;
  const bool contested = my_target == blue_target;
  const bool into_standing_blue = my_target == blue.position && blue_target == blue.position;
  const bool swap = my_target == blue.position && blue_target == green.position;
  if (contested || into_standing_blue || swap) {
    if (goal) {
      const Plan detour = detour_plan(layout, green, blue, goal);
      if (detour.found && !(move_target(layout, green, detour.action) == blue_target)) {
        return detour.action;
      }
    }
    return Action::kStay;
  }
  return mine;
}

}  // namespace iad::env
