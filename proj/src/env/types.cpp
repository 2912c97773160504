#include "iad/env/types.hpp"

#include "iad/common/error.hpp"

namespace iad::env {

namespace {

constexpr std::array<std::string_view, kNumActions> kActionNames = {
    "up", "down", "left", "right", "stay", "interact"};
constexpr std::array<std::string_view, 4> kItemNames = {"none", "onion", "dish", "soup"};
constexpr std::array<std::string_view, 4> kDirectionNames = {"N", "E", "S", "W"};

struct GlyphEntry {
  Cell cell;
  char glyph;
};

constexpr std::array<GlyphEntry, 7> kGlyphs = {{
    {Cell::kFloor, ' '},
    {Cell::kWall, 'X'},
    {Cell::kCounter, 'C'},
    {Cell::kOnionDispenser, 'O'},
    {Cell::kDishDispenser, 'D'},
    {Cell::kPot, 'P'},
    {Cell::kServing, 'S'},
}};

}  // namespace

Position offset(Position p, Direction d) {
  switch (d) {
    case Direction::kNorth: return {p.x, p.y - 1};
    case Direction::kEast: return {p.x + 1, p.y};
    case Direction::kSouth: return {p.x, p.y + 1};
    case Direction::kWest: return {p.x - 1, p.y};
  }
  return p;
}

bool action_direction(Action a, Direction* out) {
  switch (a) {
    case Action::kUp: *out = Direction::kNorth; return true;
    case Action::kDown: *out = Direction::kSouth; return true;
    case Action::kLeft: *out = Direction::kWest; return true;
    case Action::kRight: *out = Direction::kEast; return true;
    default: return false;
  }
}

std::string_view action_name(Action a) { return kActionNames[action_index(a)]; }

Action parse_action(std::string_view name) {
  for (int i = 0; i < kNumActions; ++i) {
    if (kActionNames[i] == name) return static_cast<Action>(i);
  }
  throw ConfigError("unknown action '" + std::string(name) + "'");
}

Action action_from_index(int index) {
  if (index < 0 || index >= kNumActions) {
    throw ContractViolation("action index " + std::to_string(index) + " out of range");
  }
  return static_cast<Action>(index);
}

std::string_view item_name(Item item) { return kItemNames[static_cast<int>(item)]; }

Item parse_item(std::string_view name) {
  for (int i = 0; i < 4; ++i) {
    if (kItemNames[i] == name) return static_cast<Item>(i);
  }
  throw ConfigError("unknown item '" + std::string(name) + "'");
}

std::string_view direction_name(Direction d) { return kDirectionNames[static_cast<int>(d)]; }

Direction parse_direction(std::string_view name) {
  for (int i = 0; i < 4; ++i) {
    if (kDirectionNames[i] == name) return static_cast<Direction>(i);
  }
  throw ConfigError("unknown orientation '" + std::string(name) + "' (expected N, E, S or W)");
}

std::string_view player_name(int player) { return player == kBlue ? "blue" : "green"; }

int parse_player(std::string_view name) {
  if (name == "blue") return kBlue;
  if (name == "green") return kGreen;
  throw ConfigError("unknown player '" + std::string(name) + "'");
}

char cell_glyph(Cell cell) {
  for (const auto& e : kGlyphs) {
    if (e.cell == cell) return e.glyph;
  }
  return '?';
}

bool glyph_cell(char glyph, Cell* out) {
  for (const auto& e : kGlyphs) {
    if (e.glyph == glyph) {
      *out = e.cell;
      return true;
    }
  }
  return false;
}

}  // namespace iad::env
