#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "iad/env/game.hpp"

namespace iad::env {

// Channel order of the C x H x W observation grid.
namespace channel {
inline constexpr int kWall = 0;
inline constexpr int kCounter = 1;
inline constexpr int kPot = 2;
inline constexpr int kOnionDispenser = 3;
inline constexpr int kDishDispenser = 4;
inline constexpr int kServing = 5;
inline constexpr int kPotOnions = 6;   // onions / pot_capacity
inline constexpr int kPotTimer = 7;    // remaining / cook_time while cooking
inline constexpr int kPotReady = 8;
inline constexpr int kCounterItem = 9;  // +0 onion, +1 dish, +2 soup
inline constexpr int kEgoPosition = 12;
inline constexpr int kEgoOrientation = 13;  // N, E, S, W
inline constexpr int kEgoHeld = 17;         // onion, dish, soup
inline constexpr int kPartnerPosition = 20;
inline constexpr int kPartnerOrientation = 21;
inline constexpr int kPartnerHeld = 25;
}  // namespace channel

inline constexpr int kObservationChannels = 28;

std::size_t observation_size(const LayoutSpec& layout);

// Coordinates are absolute; only the channel blocks are ego-relative (the ego
// player's channels come first).
std::vector<double> encode_observation(const LayoutSpec& layout, const GameState& state, int ego);
void encode_observation_into(const LayoutSpec& layout, const GameState& state, int ego,
                             std::span<double> out);

std::uint64_t observation_digest(std::span<const double> obs);

}  // namespace iad::env
