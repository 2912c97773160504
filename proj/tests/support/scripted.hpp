#pragma once

#include <filesystem>
#include <vector>

#include "iad/env/layout.hpp"
#include "iad/env/types.hpp"

namespace iad::testing {

inline std::filesystem::path source_dir() { return IAD_SOURCE_DIR; }
inline std::filesystem::path layouts_dir() { return source_dir() / "layouts"; }

inline env::LayoutSpec shipped_layout(const std::string& name) {
  return env::load_layout(layouts_dir() / (name + ".layout"));
}

inline const std::vector<std::string>& shipped_layout_names() {
  static const std::vector<std::string> names = {
      "cramped_room_mini", "asymmetric_advantages_mini", "coordination_ring_mini",
      "counter_circuit_mini", "forced_coordination_mini"};
  return names;
}

// Blue cooks and serves one soup alone on cramped_room_mini while green stays.
// Three onion trips, a dish, waiting out the 10-step cook, pickup, delivery.
inline std::vector<env::Action> cramped_room_solo_delivery() {
  using env::Action;
  return {
      Action::kUp,       Action::kLeft,     Action::kInteract,  // first onion
      Action::kRight,    Action::kUp,       Action::kInteract,  // into the pot
      Action::kLeft,     Action::kInteract,                     // second onion
      Action::kRight,    Action::kUp,       Action::kInteract,
      Action::kLeft,     Action::kInteract,                     // third onion
      Action::kRight,    Action::kUp,       Action::kInteract,  // cooking starts
      Action::kDown,     Action::kLeft,     Action::kDown,      Action::kInteract,  // dish
      Action::kUp,       Action::kRight,    Action::kUp,
      Action::kStay,     Action::kStay,     Action::kInteract,  // soup onto the dish
      Action::kDown,     Action::kRight,    Action::kDown,      Action::kInteract,  // serve
  };
}

}  // namespace iad::testing
