#include "iad/play/protocol.hpp"

#include "iad/common/error.hpp"

namespace iad::play {

using nlohmann::json;

namespace {

const json& require(const json& j, const char* key, json::value_t type, const char* type_name) {
  if (!j.contains(key)) throw ProtocolError(std::string("missing field '") + key + "'");
  const json& v = j[key];
  const bool ok = type == json::value_t::number_integer ? v.is_number_integer() : v.type() == type;
  if (!ok) throw ProtocolError(std::string("field '") + key + "' must be " + type_name);
  return v;
}

}  // namespace

ClientMessage parse_client_message(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ProtocolError(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw ProtocolError("message must be a JSON object");
  const std::string type = require(j, "type", json::value_t::string, "a string").get<std::string>();
  if (type == "join") {
    JoinMessage m;
    m.layout = require(j, "layout", json::value_t::string, "a string").get<std::string>();
    const std::string side = require(j, "side", json::value_t::string, "a string").get<std::string>();
    if (side == "blue") {
      m.side = env::kBlue;
    } else if (side == "green") {
      m.side = env::kGreen;
    } else {
      throw ProtocolError("side must be \"blue\" or \"green\"");
    }
    if (j.contains("show_skill")) {
      m.show_skill = require(j, "show_skill", json::value_t::boolean, "a boolean").get<bool>();
    }
    return m;
  }
  if (type == "action") {
    ActionMessage m;
    const std::string name = require(j, "action", json::value_t::string, "a string").get<std::string>();
    try {
      m.action = env::parse_action(name);
    } catch (const std::exception&) {
      throw ProtocolError("unknown action '" + name +
                          "' (expected up, down, left, right, stay or interact)");
    }
    const json& seq = j.contains("seq") ? j["seq"] : json();
    if (!seq.is_number_integer()) throw ProtocolError("field 'seq' must be an integer");
    m.seq = seq.get<std::int64_t>();
    return m;
  }
  throw ProtocolError("unknown message type '" + type + "'");
}

json to_json(const JoinMessage& m) {
  return {{"type", "join"},
          {"layout", m.layout},
          {"side", env::player_name(m.side)},
          {"show_skill", m.show_skill}};
}

json to_json(const ActionMessage& m) {
  return {{"type", "action"}, {"action", env::action_name(m.action)}, {"seq", m.seq}};
}

json state_message(const StateView& v) {
  const env::LayoutSpec& layout = *v.layout;
  const env::GameState& s = *v.state;
  json grid = json::array();
  for (int y = 0; y < layout.height; ++y) {
    std::string row;
    for (int x = 0; x < layout.width; ++x) row += env::cell_glyph(layout.at({x, y}));
    grid.push_back(row);
  }
  json players = json::array();
  for (int p = 0; p < env::kNumPlayers; ++p) {
    const env::PlayerState& ps = s.players[static_cast<std::size_t>(p)];
    players.push_back({{"side", env::player_name(p)},
                       {"x", ps.position.x},
                       {"y", ps.position.y},
                       {"orientation", env::direction_name(ps.orientation)},
                       {"held", env::item_name(ps.held)},
                       {"controller", p == v.human ? "human" : "agent"}});
  }
  json pots = json::array();
  for (std::size_t i = 0; i < layout.pots.size(); ++i) {
    const env::PotState& pot = s.pots[i];
    pots.push_back({{"x", layout.pots[i].x},
                    {"y", layout.pots[i].y},
                    {"onions", pot.onions},
                    {"cook_timer", pot.cook_timer},
                    {"cooking", pot.cooking()},
                    {"ready", pot.ready}});
  }
  json counters = json::array();
  for (std::size_t i = 0; i < layout.counters.size(); ++i) {
    counters.push_back({{"x", layout.counters[i].x},
                        {"y", layout.counters[i].y},
                        {"item", env::item_name(s.counters[i])}});
  }
  json events = json::array();
  for (const env::Event& e : v.events) {
    events.push_back({{"kind", env::event_name(e.kind)},
                      {"player", e.player < 0 ? json(nullptr) : json(env::player_name(e.player))},
                      {"x", e.where.x},
                      {"y", e.where.y}});
  }
  return {{"type", "state"},
          {"session", v.session},
          {"layout", layout.name},
          {"t", s.t},
          {"horizon", layout.horizon},
          {"done", s.done},
          {"width", layout.width},
          {"height", layout.height},
          {"grid", grid},
          {"you", env::player_name(v.human)},
          {"players", players},
          {"pots", pots},
          {"counters", counters},
          {"rewards",
           {{"extrinsic", v.total_extrinsic},
            {"shaped", v.total_shaped},
            {"total", v.total_extrinsic + v.total_shaped}}},
          {"step_rewards", {{"extrinsic", v.step_extrinsic}, {"shaped", v.step_shaped}}},
          {"events", events},
          {"active_skill", v.active_skill ? json(*v.active_skill) : json(nullptr)},
          {"skill_changed", v.skill_changed},
          {"last_seq", v.last_seq}};
}

json error_message(const std::string& message) {
  return {{"type", "error"}, {"message", message}};
}

}  // namespace iad::play
