#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "iad/env/game.hpp"

namespace iad::env {

// One step of a recorded episode. Files are JSON-lines, one record per step;
// several episodes may follow each other, each restarting at t = 0 after a
// record with done = true.
struct TrajectoryRecord {
  int t = 0;
  std::string layout;
  std::uint64_t state_digest = 0;  // state before the step
  std::uint64_t obs_digest = 0;    // observation of the human (blue when no human)
  std::array<Action, kNumPlayers> actions{Action::kStay, Action::kStay};
  std::optional<int> human;        // seat played by a human, if any
  std::optional<int> agent_skill;  // active skill of the policy-controlled seat
  bool skill_new = false;
  double reward_extrinsic = 0.0;
  double reward_shaped = 0.0;
  std::vector<Event> events;
  bool done = false;

  bool operator==(const TrajectoryRecord&) const = default;
};

nlohmann::json record_to_json(const TrajectoryRecord& record);
TrajectoryRecord record_from_json(const nlohmann::json& j);

// Builds the record for the transition `state` --(actions)--> `result`.
TrajectoryRecord make_record(const LayoutSpec& layout, const GameState& state,
                             std::array<Action, kNumPlayers> actions, const StepResult& result,
                             std::optional<int> human = std::nullopt,
                             std::optional<int> agent_skill = std::nullopt, bool skill_new = false);

std::string trajectory_to_jsonl(const std::vector<TrajectoryRecord>& records);
void write_trajectory(const std::filesystem::path& path,
                      const std::vector<TrajectoryRecord>& records);

// Throws IngestionError naming the file and 1-based line for malformed JSON,
// missing fields, unknown action names or a broken t sequence.
std::vector<TrajectoryRecord> read_trajectory(const std::filesystem::path& path);

struct ReplayStep {
  GameState state;  // before the step
  StepResult result;
};

struct ReplayResult {
  std::vector<ReplayStep> steps;
  double extrinsic_total = 0.0;
  double shaped_total = 0.0;
  int episodes = 0;
};

// Re-simulates the logged actions from reset. Throws IngestionError when a
// logged state digest, reward or done flag disagrees with the simulation.
ReplayResult replay_trajectory(const LayoutSpec& layout, const std::vector<TrajectoryRecord>& records,
                               const std::string& source = "<trajectory>");

}  // namespace iad::env
