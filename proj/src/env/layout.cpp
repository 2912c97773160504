#include "iad/env/layout.hpp"

#include <charconv>
#include <cstdio>
#include <optional>
#include <sstream>

#include "iad/common/error.hpp"
#include "iad/common/io.hpp"

namespace iad::env {

namespace {

struct Violation {
  std::string message;
  std::optional<Position> where;
};

std::optional<Violation> find_violation(const LayoutSpec& layout) {
  if (layout.width < 3 || layout.height < 3) {
    return Violation{"grid must be at least 3x3", std::nullopt};
  }
  if (static_cast<int>(layout.grid.size()) != layout.width * layout.height) {
    return Violation{"grid size does not match width x height", std::nullopt};
  }
  for (int y = 0; y < layout.height; ++y) {
    for (int x = 0; x < layout.width; ++x) {
      const bool edge = x == 0 || y == 0 || x == layout.width - 1 || y == layout.height - 1;
      if (edge && layout.at({x, y}) == Cell::kFloor) {
        return Violation{"grid boundary must not be floor", Position{x, y}};
      }
    }
  }
  for (int p = 0; p < kNumPlayers; ++p) {
    if (!layout.is_floor(layout.start[p])) {
      return Violation{std::string("start position of ") + std::string(player_name(p)) +
                           " is not a floor cell",
                       layout.start[p]};
    }
  }
  if (layout.start[0] == layout.start[1]) {
    return Violation{"both start positions are on the same cell", layout.start[0]};
  }
  int onions = 0, dishes = 0, pots = 0, serving = 0;
  for (Cell c : layout.grid) {
    onions += c == Cell::kOnionDispenser;
    dishes += c == Cell::kDishDispenser;
    pots += c == Cell::kPot;
    serving += c == Cell::kServing;
  }
  if (pots == 0) return Violation{"layout has no pot", std::nullopt};
  if (onions == 0) return Violation{"layout has no onion dispenser", std::nullopt};
  if (dishes == 0) return Violation{"layout has no dish dispenser", std::nullopt};
  if (serving == 0) return Violation{"layout has no serving cell", std::nullopt};
  if (layout.cook_time < 0) return Violation{"cook_time must be >= 0", std::nullopt};
  if (layout.pot_capacity < 1) return Violation{"pot_capacity must be >= 1", std::nullopt};
  if (layout.horizon < 1) return Violation{"horizon must be >= 1", std::nullopt};
  return std::nullopt;
}

void index_slots(LayoutSpec& layout) {
  layout.pots.clear();
  layout.counters.clear();
  for (int y = 0; y < layout.height; ++y) {
    for (int x = 0; x < layout.width; ++x) {
      const Cell c = layout.at({x, y});
      if (c == Cell::kPot) layout.pots.push_back({x, y});
      if (c == Cell::kCounter) layout.counters.push_back({x, y});
    }
  }
}

int parse_int(const KeyValueEntry& entry) {
  int value = 0;
  const auto* begin = entry.value.data();
  const auto* end = begin + entry.value.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw ParseError("'" + entry.key + "' expects an integer, got '" + entry.value + "'",
                     entry.line, 1);
  }
  return value;
}

double parse_double(const KeyValueEntry& entry) {
  try {
    std::size_t used = 0;
    const double value = std::stod(entry.value, &used);
    if (used == entry.value.size()) return value;
  } catch (const std::exception&) {
  }
  throw ParseError("'" + entry.key + "' expects a number, got '" + entry.value + "'",
                   entry.line, 1);
}

Position parse_position(const KeyValueEntry& entry) {
  const auto parts = split(entry.value, ',');
  if (parts.size() == 2) {
    try {
      return {std::stoi(trim(parts[0])), std::stoi(trim(parts[1]))};
    } catch (const std::exception&) {
    }
  }
  throw ParseError("'" + entry.key + "' expects `x,y`, got '" + entry.value + "'", entry.line,
                   1);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

int LayoutSpec::pot_index(Position p) const {
  for (std::size_t i = 0; i < pots.size(); ++i) {
    if (pots[i] == p) return static_cast<int>(i);
  }
  return -1;
}

int LayoutSpec::counter_index(Position p) const {
  for (std::size_t i = 0; i < counters.size(); ++i) {
    if (counters[i] == p) return static_cast<int>(i);
  }
  return -1;
}

LayoutSpec parse_layout(std::string_view text) {
  std::vector<std::string> lines;
  {
    std::size_t pos = 0;
    while (pos <= text.size()) {
      auto end = text.find('\n', pos);
      if (end == std::string_view::npos) end = text.size();
      std::string line(text.substr(pos, end - pos));
      if (!line.empty() && line.back() == '\r') line.pop_back();
      lines.push_back(std::move(line));
      pos = end + 1;
    }
  }

  // Header: everything up to the first line that is neither blank, a comment,
  // nor a `key = value` pair.
  std::size_t i = 0;
  std::string header;
  for (; i < lines.size(); ++i) {
    const std::string t = trim(lines[i]);
    if (t.empty() || t.front() == '#' || lines[i].find('=') != std::string::npos) {
      header += lines[i];
    } else {
      break;
    }
    header += '\n';
  }
  const std::size_t grid_first_line = i + 1;
  if (i == lines.size()) throw ParseError("layout has no grid", lines.size(), 1);

  std::vector<std::string> rows;
  for (; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) break;
    if (lines[i].find('=') != std::string::npos) {
      throw ParseError("header line inside the grid", i + 1, lines[i].find('=') + 1);
    }
    rows.push_back(lines[i]);
  }
  for (std::size_t j = i; j < lines.size(); ++j) {
    if (!trim(lines[j]).empty()) throw ParseError("unexpected text after the grid", j + 1, 1);
  }

  LayoutSpec layout;
  layout.height = static_cast<int>(rows.size());
  layout.width = static_cast<int>(rows.front().size());
  layout.grid.assign(static_cast<std::size_t>(layout.width * layout.height), Cell::kFloor);
  std::optional<Position> starts[kNumPlayers];
  for (int y = 0; y < layout.height; ++y) {
    const std::string& row = rows[y];
    const std::size_t line_no = grid_first_line + y;
    if (static_cast<int>(row.size()) != layout.width) {
      throw ParseError("row has " + std::to_string(row.size()) + " columns, expected " +
                           std::to_string(layout.width),
                       line_no, std::min(row.size(), static_cast<std::size_t>(layout.width)) + 1);
    }
    for (int x = 0; x < layout.width; ++x) {
      const char g = row[x];
      Cell cell;
      if (g == '1' || g == '2') {
        const int player = g - '1';
        if (starts[player]) {
          throw ParseError(std::string("duplicate start position '") + g + "'", line_no, x + 1);
        }
        starts[player] = Position{x, y};
        cell = Cell::kFloor;
      } else if (!glyph_cell(g, &cell)) {
        throw ParseError(std::string("unknown glyph '") + g + "'", line_no, x + 1);
      }
      layout.grid[y * layout.width + x] = cell;
    }
  }

  for (const auto& entry : parse_key_values(header)) {
    if (entry.key == "name") {
      layout.name = entry.value;
    } else if (entry.key == "horizon") {
      layout.horizon = parse_int(entry);
    } else if (entry.key == "cook_time") {
      layout.cook_time = parse_int(entry);
    } else if (entry.key == "pot_capacity") {
      layout.pot_capacity = parse_int(entry);
    } else if (entry.key == "blue_orientation" || entry.key == "green_orientation") {
      try {
        layout.start_orientation[entry.key == "blue_orientation" ? kBlue : kGreen] =
            parse_direction(entry.value);
      } catch (const ConfigError& e) {
        throw ParseError(e.what(), entry.line, 1);
      }
    } else if (entry.key == "start_blue") {
      starts[kBlue] = parse_position(entry);
    } else if (entry.key == "start_green") {
      starts[kGreen] = parse_position(entry);
    } else if (entry.key == "shaping_onion_in_pot") {
      layout.shaping.onion_in_pot = parse_double(entry);
    } else if (entry.key == "shaping_dish_pickup") {
      layout.shaping.dish_pickup = parse_double(entry);
    } else if (entry.key == "shaping_soup_pickup") {
      layout.shaping.soup_pickup = parse_double(entry);
    } else {
      throw ParseError("unknown header key '" + entry.key + "'", entry.line, 1);
    }
  }
  for (int p = 0; p < kNumPlayers; ++p) {
    if (!starts[p]) {
      throw ParseError("missing start position '" + std::to_string(p + 1) + "'", grid_first_line,
                       1);
    }
    layout.start[p] = *starts[p];
  }
  index_slots(layout);

  if (auto v = find_violation(layout)) {
    if (v->where && layout.in_bounds(*v->where)) {
      throw ParseError(v->message, grid_first_line + v->where->y, v->where->x + 1);
    }
    throw ParseError(v->message, grid_first_line, 1);
  }
  return layout;
}

std::string serialize_layout(const LayoutSpec& layout) {
  std::ostringstream out;
  out << "name = " << layout.name << '\n';
  out << "horizon = " << layout.horizon << '\n';
  out << "cook_time = " << layout.cook_time << '\n';
  out << "pot_capacity = " << layout.pot_capacity << '\n';
  out << "blue_orientation = " << direction_name(layout.start_orientation[kBlue]) << '\n';
  out << "green_orientation = " << direction_name(layout.start_orientation[kGreen]) << '\n';
  const RewardShaping defaults;
  if (layout.shaping.onion_in_pot != defaults.onion_in_pot) {
    out << "shaping_onion_in_pot = " << format_double(layout.shaping.onion_in_pot) << '\n';
  }
  if (layout.shaping.dish_pickup != defaults.dish_pickup) {
    out << "shaping_dish_pickup = " << format_double(layout.shaping.dish_pickup) << '\n';
  }
  if (layout.shaping.soup_pickup != defaults.soup_pickup) {
    out << "shaping_soup_pickup = " << format_double(layout.shaping.soup_pickup) << '\n';
  }
  out << '\n';
  for (int y = 0; y < layout.height; ++y) {
    for (int x = 0; x < layout.width; ++x) {
      const Position p{x, y};
      if (p == layout.start[kBlue]) {
        out << '1';
      } else if (p == layout.start[kGreen]) {
        out << '2';
      } else {
        out << cell_glyph(layout.at(p));
      }
    }
    out << '\n';
  }
  return out.str();
}

LayoutSpec load_layout(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return parse_layout(text);
  } catch (const ParseError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

LayoutSpec resolve_layout(const std::string& name_or_path,
                          const std::filesystem::path& layouts_dir) {
  if (std::filesystem::is_regular_file(name_or_path)) return load_layout(name_or_path);
  const auto shipped = layouts_dir / (name_or_path + ".layout");
  if (std::filesystem::is_regular_file(shipped)) return load_layout(shipped);
  throw ConfigError("unknown layout '" + name_or_path + "' (not a file, not in " +
                    layouts_dir.string() + ")");
}

void validate_layout(const LayoutSpec& layout) {
  if (auto v = find_violation(layout)) throw ConfigError("layout " + layout.name + ": " + v->message);
}

}  // namespace iad::env
