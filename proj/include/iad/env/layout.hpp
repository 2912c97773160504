#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "iad/env/types.hpp"

namespace iad::env {

// Optional dense shaping beyond the +3 onion-in-pot reward. Both default off.
struct RewardShaping {
  double onion_in_pot = 3.0;
  double dish_pickup = 0.0;
  double soup_pickup = 0.0;
  bool operator==(const RewardShaping&) const = default;
};

struct LayoutSpec {
  std::string name;
  int width = 0;
  int height = 0;
  std::vector<Cell> grid;  // row-major, height x width
  std::array<Position, kNumPlayers> start{};
  std::array<Direction, kNumPlayers> start_orientation{Direction::kNorth, Direction::kNorth};
  int cook_time = 20;
  int pot_capacity = 3;
  int horizon = 400;
  RewardShaping shaping;

  // Row-major positions of pots and counters; the index is the slot used in
  // GameState.
  std::vector<Position> pots;
  std::vector<Position> counters;

  bool in_bounds(Position p) const { return p.x >= 0 && p.y >= 0 && p.x < width && p.y < height; }
  Cell at(Position p) const { return in_bounds(p) ? grid[p.y * width + p.x] : Cell::kWall; }
  bool is_floor(Position p) const { return at(p) == Cell::kFloor; }
  int pot_index(Position p) const;      // -1 when not a pot
  int counter_index(Position p) const;  // -1 when not a counter

  bool operator==(const LayoutSpec&) const = default;
};

// Header of `key = value` lines (name, horizon, cook_time, pot_capacity,
// blue_orientation, green_orientation, start_blue, start_green,
// shaping_onion_in_pot, shaping_dish_pickup, shaping_soup_pickup) followed by
// the grid. Grid rows may not contain '='.
LayoutSpec parse_layout(std::string_view text);
std::string serialize_layout(const LayoutSpec& layout);

LayoutSpec load_layout(const std::filesystem::path& path);

// Resolves a layout argument: an existing file path, or the name of a layout
// shipped in `<layouts_dir>/<name>.layout`.
LayoutSpec resolve_layout(const std::string& name_or_path,
                          const std::filesystem::path& layouts_dir);

// Checks the structural invariants; throws ConfigError.
void validate_layout(const LayoutSpec& layout);

}  // namespace iad::env
