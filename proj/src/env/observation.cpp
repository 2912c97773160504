#include "iad/env/observation.hpp"

#include <algorithm>

#include "iad/common/digest.hpp"
#include "iad/common/error.hpp"

namespace iad::env {

std::size_t observation_size(const LayoutSpec& layout) {
  return static_cast<std::size_t>(kObservationChannels * layout.width * layout.height);
}

std::vector<double> encode_observation(const LayoutSpec& layout, const GameState& state, int ego) {
  std::vector<double> out(observation_size(layout));
  encode_observation_into(layout, state, ego, out);
  return out;
}

void encode_observation_into(const LayoutSpec& layout, const GameState& state, int ego,
                             std::span<double> out) {
  if (out.size() != observation_size(layout)) {
    throw ContractViolation("observation buffer has " + std::to_string(out.size()) +
                            " entries, expected " + std::to_string(observation_size(layout)));
  }
  if (ego != kBlue && ego != kGreen) throw ContractViolation("ego must be 0 or 1");
  std::fill(out.begin(), out.end(), 0.0);
  const int plane = layout.width * layout.height;
  auto set = [&](int c, Position p, double v) { out[c * plane + p.y * layout.width + p.x] = v; };

  for (int y = 0; y < layout.height; ++y) {
    for (int x = 0; x < layout.width; ++x) {
      const Position p{x, y};
      switch (layout.at(p)) {
        case Cell::kWall: set(channel::kWall, p, 1.0); break;
        case Cell::kCounter: set(channel::kCounter, p, 1.0); break;
        case Cell::kPot: set(channel::kPot, p, 1.0); break;
        case Cell::kOnionDispenser: set(channel::kOnionDispenser, p, 1.0); break;
        case Cell::kDishDispenser: set(channel::kDishDispenser, p, 1.0); break;
        case Cell::kServing: set(channel::kServing, p, 1.0); break;
        case Cell::kFloor: break;
      }
    }
  }
  for (std::size_t i = 0; i < layout.pots.size(); ++i) {
    const PotState& pot = state.pots[i];
    const Position p = layout.pots[i];
    set(channel::kPotOnions, p, static_cast<double>(pot.onions) / layout.pot_capacity);
    if (pot.cooking() && layout.cook_time > 0) {
      set(channel::kPotTimer, p, static_cast<double>(pot.cook_timer) / layout.cook_time);
    }
    if (pot.ready) set(channel::kPotReady, p, 1.0);
  }
  for (std::size_t i = 0; i < layout.counters.size(); ++i) {
    const Item item = state.counters[i];
    if (item != Item::kNone) {
      set(channel::kCounterItem + static_cast<int>(item) - 1, layout.counters[i], 1.0);
    }
  }
  const int order[2] = {ego, 1 - ego};
  const int base_pos[2] = {channel::kEgoPosition, channel::kPartnerPosition};
  const int base_dir[2] = {channel::kEgoOrientation, channel::kPartnerOrientation};
  const int base_held[2] = {channel::kEgoHeld, channel::kPartnerHeld};
  for (int k = 0; k < 2; ++k) {
    const PlayerState& pl = state.players[order[k]];
    set(base_pos[k], pl.position, 1.0);
    set(base_dir[k] + static_cast<int>(pl.orientation), pl.position, 1.0);
    if (pl.held != Item::kNone) set(base_held[k] + static_cast<int>(pl.held) - 1, pl.position, 1.0);
  }
}

std::uint64_t observation_digest(std::span<const double> obs) {
  Fnv1a h;
  for (double v : obs) h.update_double(v);
  return h.value();
}

}  // namespace iad::env
