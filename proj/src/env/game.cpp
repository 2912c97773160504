#include "iad/env/game.hpp"

#include "iad/common/digest.hpp"
#include "iad/common/error.hpp"

namespace iad::env {

namespace {

constexpr std::array<std::string_view, 9> kEventNames = {
    "onion_pickup",   "dish_pickup",     "onion_placed",   "cooking_started", "soup_ready",
    "soup_picked_up", "soup_delivered", "counter_place", "counter_pickup"};

struct StepContext {
  const LayoutSpec& layout;
  GameState& s;
  StepResult& result;
  bool delivered = false;
};

void interact(StepContext& ctx, int player) {
  PlayerState& me = ctx.s.players[player];
  const Position target = offset(me.position, me.orientation);
  const LayoutSpec& layout = ctx.layout;
  switch (layout.at(target)) {
    case Cell::kOnionDispenser:
      if (me.held == Item::kNone) {
        me.held = Item::kOnion;
        ctx.result.events.push_back({EventKind::kOnionPickup, player, target});
      }
      break;
    case Cell::kDishDispenser:
      if (me.held == Item::kNone) {
        me.held = Item::kDish;
        ctx.result.reward_shaped += layout.shaping.dish_pickup;
        ctx.result.events.push_back({EventKind::kDishPickup, player, target});
      }
      break;
    case Cell::kPot: {
      PotState& pot = ctx.s.pots[layout.pot_index(target)];
      if (me.held == Item::kOnion && pot.cook_timer < 0 && !pot.ready &&
          pot.onions < layout.pot_capacity) {
        me.held = Item::kNone;
        ++pot.onions;
        ctx.result.reward_shaped += layout.shaping.onion_in_pot;
        ctx.result.events.push_back({EventKind::kOnionPlaced, player, target});
        if (pot.onions == layout.pot_capacity) {
          pot.cook_timer = layout.cook_time;
          ctx.result.events.push_back({EventKind::kCookingStarted, player, target});
          if (layout.cook_time == 0) {
            pot.ready = true;
            ctx.result.events.push_back({EventKind::kSoupReady, -1, target});
          }
        }
      } else if (me.held == Item::kDish && pot.ready) {
        me.held = Item::kSoup;
        pot = PotState{};
        ctx.result.reward_shaped += layout.shaping.soup_pickup;
        ctx.result.events.push_back({EventKind::kSoupPickedUp, player, target});
      }
      break;
    }
    case Cell::kServing:
      // At most one delivery is credited per step; a simultaneous second
      // delivery simply does not happen and the soup stays in hand.
      if (me.held == Item::kSoup && !ctx.delivered) {
        me.held = Item::kNone;
        ctx.delivered = true;
        ctx.result.reward_extrinsic += kDeliveryReward;
        ctx.result.events.push_back({EventKind::kSoupDelivered, player, target});
      }
      break;
    case Cell::kCounter: {
      Item& slot = ctx.s.counters[layout.counter_index(target)];
      if (me.held != Item::kNone && slot == Item::kNone) {
        slot = me.held;
        me.held = Item::kNone;
        ctx.result.events.push_back({EventKind::kCounterPlace, player, target});
      } else if (me.held == Item::kNone && slot != Item::kNone) {
        me.held = slot;
        slot = Item::kNone;
        ctx.result.events.push_back({EventKind::kCounterPickup, player, target});
      }
      break;
    }
    case Cell::kFloor:
    case Cell::kWall:
      break;
  }
}

}  // namespace

std::string_view event_name(EventKind kind) { return kEventNames[static_cast<int>(kind)]; }

EventKind parse_event(std::string_view name) {
  for (std::size_t i = 0; i < kEventNames.size(); ++i) {
    if (kEventNames[i] == name) return static_cast<EventKind>(i);
  }
  throw ConfigError("unknown event '" + std::string(name) + "'");
}

GameState reset(const LayoutSpec& layout, std::uint64_t /*seed*/) {
  GameState s;
  for (int p = 0; p < kNumPlayers; ++p) {
    s.players[p].position = layout.start[p];
    s.players[p].orientation = layout.start_orientation[p];
    s.players[p].held = Item::kNone;
  }
  s.pots.assign(layout.pots.size(), PotState{});
  s.counters.assign(layout.counters.size(), Item::kNone);
  s.t = 0;
  s.done = false;
  return s;
}

StepResult step(const LayoutSpec& layout, const GameState& state, Action blue, Action green) {
  if (state.done || state.t >= layout.horizon) {
    throw ContractViolation("step called on a finished episode (t=" + std::to_string(state.t) +
                            ")");
  }
  StepResult result;
  result.next = state;
  GameState& s = result.next;

  for (std::size_t i = 0; i < s.pots.size(); ++i) {
    PotState& pot = s.pots[i];
    if (pot.cooking()) {
      if (--pot.cook_timer == 0) {
        pot.ready = true;
        result.events.push_back({EventKind::kSoupReady, -1, layout.pots[i]});
      }
    }
  }

  const std::array<Action, kNumPlayers> actions = {blue, green};
  StepContext ctx{layout, s, result};
  for (int p = 0; p < kNumPlayers; ++p) {
    if (actions[p] == Action::kInteract) interact(ctx, p);
  }

  std::array<Position, kNumPlayers> target;
  for (int p = 0; p < kNumPlayers; ++p) {
    PlayerState& player = s.players[p];
    target[p] = player.position;
    Direction d;
    if (action_direction(actions[p], &d)) {
      player.orientation = d;
      const Position next = offset(player.position, d);
      if (layout.is_floor(next)) target[p] = next;
    }
  }
  const bool same_target = target[0] == target[1];
  const bool swap = target[0] == s.players[1].position && target[1] == s.players[0].position;
  if (!same_target && !swap) {
    for (int p = 0; p < kNumPlayers; ++p) s.players[p].position = target[p];
  }

  ++s.t;
  s.done = s.t >= layout.horizon;
  result.done = s.done;
#ifndef NDEBUG
  check_state(layout, s);
#endif
  return result;
}

void check_state(const LayoutSpec& layout, const GameState& state) {
  for (int p = 0; p < kNumPlayers; ++p) {
    if (!layout.is_floor(state.players[p].position)) {
      throw ContractViolation(std::string(player_name(p)) + " is not on a floor cell");
    }
  }
  if (state.players[0].position == state.players[1].position) {
    throw ContractViolation("players share a cell");
  }
  if (state.pots.size() != layout.pots.size() || state.counters.size() != layout.counters.size()) {
    throw ContractViolation("state does not match layout slots");
  }
  for (const PotState& pot : state.pots) {
    if (pot.onions < 0 || pot.onions > layout.pot_capacity) {
      throw ContractViolation("pot onion count out of range");
    }
    if (pot.ready && (pot.onions != layout.pot_capacity || pot.cook_timer != 0)) {
      throw ContractViolation("ready pot must be full with a finished timer");
    }
    if (pot.cook_timer >= 0 && pot.onions != layout.pot_capacity) {
      throw ContractViolation("cooking pot must be full");
    }
  }
  if (state.t < 0 || state.t > layout.horizon) throw ContractViolation("t out of range");
}

std::uint64_t state_digest(const GameState& state) {
  Fnv1a h;
  for (const auto& p : state.players) {
    h.update_u64(static_cast<std::uint64_t>(p.position.x));
    h.update_u64(static_cast<std::uint64_t>(p.position.y));
    h.update_u64(static_cast<std::uint64_t>(p.orientation));
    h.update_u64(static_cast<std::uint64_t>(p.held));
  }
  for (const auto& pot : state.pots) {
    h.update_u64(static_cast<std::uint64_t>(pot.onions));
    h.update_u64(static_cast<std::uint64_t>(static_cast<std::int64_t>(pot.cook_timer)));
    h.update_u64(pot.ready ? 1 : 0);
  }
  for (Item item : state.counters) h.update_u64(static_cast<std::uint64_t>(item));
  h.update_u64(static_cast<std::uint64_t>(state.t));
  h.update_u64(state.done ? 1 : 0);
  return h.value();
}

}  // namespace iad::env
