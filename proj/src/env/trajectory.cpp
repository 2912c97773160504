#include "iad/env/trajectory.hpp"

#include <sstream>

#include "iad/common/digest.hpp"
#include "iad/common/error.hpp"
#include "iad/common/io.hpp"
#include "iad/env/observation.hpp"

namespace iad::env {

using nlohmann::json;

namespace {

std::uint64_t parse_hex(const std::string& text) {
  std::size_t used = 0;
  const std::uint64_t v = std::stoull(text, &used, 16);
  if (used != text.size()) throw std::invalid_argument("bad hex digest");
  return v;
}

}  // namespace

json record_to_json(const TrajectoryRecord& r) {
  json j;
  j["t"] = r.t;
  j["layout"] = r.layout;
  j["state_digest"] = to_hex(r.state_digest);
  j["obs_digest"] = to_hex(r.obs_digest);
  j["actions"] = {{"blue", action_name(r.actions[kBlue])}, {"green", action_name(r.actions[kGreen])}};
  if (r.human) {
    j["human"] = player_name(*r.human);
    j["human_action"] = action_name(r.actions[*r.human]);
    j["agent_action"] = action_name(r.actions[1 - *r.human]);
  } else {
    j["human"] = nullptr;
    j["human_action"] = nullptr;
    j["agent_action"] = nullptr;
  }
  j["agent_skill"] = r.agent_skill ? json(*r.agent_skill) : json(nullptr);
  j["skill_new"] = r.skill_new;
  j["rewards"] = {{"extrinsic", r.reward_extrinsic}, {"shaped", r.reward_shaped}};
  json events = json::array();
  for (const Event& e : r.events) {
    events.push_back({{"kind", event_name(e.kind)},
                      {"player", e.player < 0 ? json(nullptr) : json(player_name(e.player))},
                      {"x", e.where.x},
                      {"y", e.where.y}});
  }
  j["events"] = std::move(events);
  j["done"] = r.done;
  return j;
}

TrajectoryRecord record_from_json(const json& j) {
  TrajectoryRecord r;
  r.t = j.at("t").get<int>();
  r.layout = j.at("layout").get<std::string>();
  r.state_digest = parse_hex(j.at("state_digest").get<std::string>());
  r.obs_digest = parse_hex(j.at("obs_digest").get<std::string>());
  r.actions[kBlue] = parse_action(j.at("actions").at("blue").get<std::string>());
  r.actions[kGreen] = parse_action(j.at("actions").at("green").get<std::string>());
  if (j.contains("human") && !j["human"].is_null()) {
    r.human = parse_player(j["human"].get<std::string>());
    if (j.contains("human_action") && !j["human_action"].is_null() &&
        parse_action(j["human_action"].get<std::string>()) != r.actions[*r.human]) {
      throw ConfigError("human_action disagrees with actions");
    }
  }
  if (j.contains("agent_skill") && !j["agent_skill"].is_null()) {
    r.agent_skill = j["agent_skill"].get<int>();
  }
  r.skill_new = j.value("skill_new", false);
  r.reward_extrinsic = j.at("rewards").at("extrinsic").get<double>();
  r.reward_shaped = j.at("rewards").at("shaped").get<double>();
  for (const auto& e : j.at("events")) {
    Event ev;
    ev.kind = parse_event(e.at("kind").get<std::string>());
    ev.player = e.at("player").is_null() ? -1 : parse_player(e.at("player").get<std::string>());
    ev.where = {e.at("x").get<int>(), e.at("y").get<int>()};
    r.events.push_back(ev);
  }
  r.done = j.at("done").get<bool>();
  return r;
}

TrajectoryRecord make_record(const LayoutSpec& layout, const GameState& state,
                             std::array<Action, kNumPlayers> actions, const StepResult& result,
                             std::optional<int> human, std::optional<int> agent_skill,
                             bool skill_new) {
  TrajectoryRecord r;
  r.t = state.t;
  r.layout = layout.name;
  r.state_digest = state_digest(state);
  r.obs_digest = observation_digest(encode_observation(layout, state, human.value_or(kBlue)));
  r.actions = actions;
  r.human = human;
  r.agent_skill = agent_skill;
  r.skill_new = skill_new;
  r.reward_extrinsic = result.reward_extrinsic;
  r.reward_shaped = result.reward_shaped;
  r.events = result.events;
  r.done = result.done;
  return r;
}

std::string trajectory_to_jsonl(const std::vector<TrajectoryRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += record_to_json(r).dump();
    out += '\n';
  }
  return out;
}

void write_trajectory(const std::filesystem::path& path,
                      const std::vector<TrajectoryRecord>& records) {
  write_file_atomic(path, trajectory_to_jsonl(records));
}

std::vector<TrajectoryRecord> read_trajectory(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const ConfigError& e) {
    throw IngestionError(path.string(), 0, e.what());
  }
  std::vector<TrajectoryRecord> records;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    TrajectoryRecord r;
    try {
      r = record_from_json(json::parse(line));
    } catch (const std::exception& e) {
      throw IngestionError(path.string(), line_no, e.what());
    }
    if (records.empty()) {
      if (r.t != 0) throw IngestionError(path.string(), line_no, "first record must have t = 0");
    } else {
      const TrajectoryRecord& prev = records.back();
      const bool continues = r.t == prev.t + 1 && !prev.done;
      const bool restarts = r.t == 0 && prev.done;
      if (!continues && !restarts) {
        throw IngestionError(path.string(), line_no,
                             "t = " + std::to_string(r.t) + " does not follow t = " +
                                 std::to_string(prev.t));
      }
    }
    records.push_back(std::move(r));
  }
  if (records.empty()) throw IngestionError(path.string(), line_no, "trajectory file is empty");
  return records;
}

ReplayResult replay_trajectory(const LayoutSpec& layout,
                               const std::vector<TrajectoryRecord>& records,
                               const std::string& source) {
  ReplayResult out;
  GameState state = reset(layout);
  bool fresh = true;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const TrajectoryRecord& r = records[i];
    if (r.t == 0 && !fresh) state = reset(layout);
    if (r.t == 0) ++out.episodes;
    fresh = false;
    if (state_digest(state) != r.state_digest) {
      throw IngestionError(source, i + 1, "state digest mismatch at t = " + std::to_string(r.t));
    }
    StepResult result = step(layout, state, r.actions[kBlue], r.actions[kGreen]);
    if (result.reward_extrinsic != r.reward_extrinsic || result.reward_shaped != r.reward_shaped ||
        result.done != r.done) {
      throw IngestionError(source, i + 1, "reward or done mismatch at t = " + std::to_string(r.t));
    }
    out.extrinsic_total += result.reward_extrinsic;
    out.shaped_total += result.reward_shaped;
    out.steps.push_back({state, result});
    state = result.next;
  }
  return out;
}

}  // namespace iad::env
