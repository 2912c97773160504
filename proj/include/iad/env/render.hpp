#pragma once

#include <string>

#include "iad/env/game.hpp"

namespace iad::env {

// Grid using the layout legend, players drawn as '1' (blue) and '2' (green),
// counter items as lowercase 'o', 'd', 's'. Status lines follow the grid.
std::string render_ascii(const LayoutSpec& layout, const GameState& state);

}  // namespace iad::env
