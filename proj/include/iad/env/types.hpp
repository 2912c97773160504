#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace iad::env {

enum class Cell : std::uint8_t {
  kFloor,
  kWall,
  kCounter,
  kOnionDispenser,
  kDishDispenser,
  kPot,
  kServing,
};

enum class Item : std::uint8_t { kNone, kOnion, kDish, kSoup };

enum class Direction : std::uint8_t { kNorth, kEast, kSouth, kWest };

enum class Action : std::uint8_t { kUp, kDown, kLeft, kRight, kStay, kInteract };

inline constexpr int kNumActions = 6;
inline constexpr int kNumPlayers = 2;
inline constexpr int kBlue = 0;
inline constexpr int kGreen = 1;

struct Position {
  int x = 0;  // column
  int y = 0;  // row
  bool operator==(const Position&) const = default;
};

Position offset(Position p, Direction d);

// Movement direction for the four move actions; stay/interact have none.
bool action_direction(Action a, Direction* out);

std::string_view action_name(Action a);
Action parse_action(std::string_view name);
Action action_from_index(int index);
inline int action_index(Action a) { return static_cast<int>(a); }

std::string_view item_name(Item item);
Item parse_item(std::string_view name);

std::string_view direction_name(Direction d);  // "N", "E", "S", "W"
Direction parse_direction(std::string_view name);

std::string_view player_name(int player);  // "blue", "green"
int parse_player(std::string_view name);

// Static glyph table shared by the layout parser and the renderer.
char cell_glyph(Cell cell);
bool glyph_cell(char glyph, Cell* out);

}  // namespace iad::env
