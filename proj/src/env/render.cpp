#include "iad/env/render.hpp"

#include <sstream>

namespace iad::env {

std::string render_ascii(const LayoutSpec& layout, const GameState& state) {
  std::ostringstream out;
  out << "t=" << state.t << "/" << layout.horizon << (state.done ? " done" : "") << '\n';
  for (int y = 0; y < layout.height; ++y) {
    for (int x = 0; x < layout.width; ++x) {
      const Position p{x, y};
      char g = cell_glyph(layout.at(p));
      const int counter = layout.counter_index(p);
      if (counter >= 0 && state.counters[counter] != Item::kNone) {
        g = "-ods"[static_cast<int>(state.counters[counter])];
      }
      if (state.players[kBlue].position == p) g = '1';
      if (state.players[kGreen].position == p) g = '2';
      out << g;
    }
    out << '\n';
  }
  for (int pl = 0; pl < kNumPlayers; ++pl) {
    const PlayerState& s = state.players[pl];
    out << player_name(pl) << " (" << s.position.x << "," << s.position.y << ") "
        << direction_name(s.orientation) << " holding " << item_name(s.held) << '\n';
  }
  for (std::size_t i = 0; i < layout.pots.size(); ++i) {
    const PotState& pot = state.pots[i];
    out << "pot (" << layout.pots[i].x << "," << layout.pots[i].y << ") onions=" << pot.onions
        << '/' << layout.pot_capacity;
    if (pot.ready) {
      out << " ready";
    } else if (pot.cooking()) {
      out << " cooking " << pot.cook_timer;
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace iad::env
