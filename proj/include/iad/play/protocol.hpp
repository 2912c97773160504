#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "iad/env/game.hpp"

namespace iad::play {

// A client message that does not match the wire schema.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct JoinMessage {
  std::string layout;
  int side = env::kBlue;  // seat the human plays
  bool show_skill = true;
};

struct ActionMessage {
  env::Action action = env::Action::kStay;
  std::int64_t seq = 0;
};

using ClientMessage = std::variant<JoinMessage, ActionMessage>;

ClientMessage parse_client_message(std::string_view text);
nlohmann::json to_json(const JoinMessage& m);
nlohmann::json to_json(const ActionMessage& m);

struct StateView {
  std::string session;
  const env::LayoutSpec* layout = nullptr;
  const env::GameState* state = nullptr;
  int human = env::kBlue;
  double total_extrinsic = 0.0;
  double total_shaped = 0.0;
  double step_extrinsic = 0.0;
  double step_shaped = 0.0;
  std::vector<env::Event> events;  // from the step that produced `state`
  std::optional<int> active_skill;  // empty when hidden or before the first decision
  bool skill_changed = false;
  std::int64_t last_seq = -1;  // last human action applied, -1 before any
};

nlohmann::json state_message(const StateView& view);
nlohmann::json error_message(const std::string& message);

}  // namespace iad::play
