#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "iad/env/layout.hpp"
#include "iad/env/types.hpp"

namespace iad::env {

struct PlayerState {
  Position position;
  Direction orientation = Direction::kNorth;
  Item held = Item::kNone;
  bool operator==(const PlayerState&) const = default;
};

struct PotState {
  int onions = 0;
  int cook_timer = -1;  // -1 idle, >0 cooking, 0 with ready set once cooked
  bool ready = false;
  bool cooking() const { return cook_timer > 0; }
  bool operator==(const PotState&) const = default;
};

struct GameState {
  std::array<PlayerState, kNumPlayers> players;
  std::vector<PotState> pots;      // indexed like LayoutSpec::pots
  std::vector<Item> counters;      // indexed like LayoutSpec::counters
  int t = 0;
  bool done = false;
  bool operator==(const GameState&) const = default;
};

enum class EventKind : std::uint8_t {
  kOnionPickup,
  kDishPickup,
  kOnionPlaced,
  kCookingStarted,
  kSoupReady,
  kSoupPickedUp,
  kSoupDelivered,
  kCounterPlace,
  kCounterPickup,
};

std::string_view event_name(EventKind kind);
EventKind parse_event(std::string_view name);

struct Event {
  EventKind kind;
  int player = -1;  // -1 for events without an actor (soup_ready)
  Position where;
  bool operator==(const Event&) const = default;
};

struct StepResult {
  GameState next;
  double reward_extrinsic = 0.0;
  double reward_shaped = 0.0;
  std::vector<Event> events;
  bool done = false;
};

inline constexpr double kDeliveryReward = 20.0;

GameState reset(const LayoutSpec& layout, std::uint64_t seed = 0);

// One simultaneous step. Order: pots tick, then interactions (blue before
// green), then movement with the collision rule (same target or swap: neither
// player moves; orientation still turns).
StepResult step(const LayoutSpec& layout, const GameState& state, Action blue, Action green);

// Throws ContractViolation when a structural invariant of the state is broken.
void check_state(const LayoutSpec& layout, const GameState& state);

std::uint64_t state_digest(const GameState& state);

}  // namespace iad::env
