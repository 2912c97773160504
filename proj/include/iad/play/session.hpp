#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "iad/core/episode.hpp"
#include "iad/env/trajectory.hpp"
#include "iad/play/protocol.hpp"
#include "iad/policy/hierarchical_policy.hpp"

namespace iad::play {

struct SessionConfig {
  env::LayoutSpec layout;
  std::shared_ptr<const policy::HierarchicalPolicy> policy;
  int human = env::kBlue;
  int tick_ms = 150;
  std::uint64_t seed = 0;  // agent sampling streams, as for core::PolicyActor
  bool show_skill = true;
};

// One human and one policy-controlled agent on one layout. The game advances
// only in tick(); actions submitted in between are buffered and the last one
// wins. Safe to call submit() from another thread than tick().
class Session {
 public:
  // Throws ConfigError when the policy cannot read the layout's observations.
  Session(std::string id, SessionConfig config);

  const std::string& id() const { return id_; }
  const SessionConfig& config() const { return config_; }

  nlohmann::json state_message() const;

  // Returns an error message (and ignores the action) when the session is
  // done or `seq` is not larger than every seq seen before.
  std::optional<nlohmann::json> submit(env::Action action, std::int64_t seq);

  // Applies the buffered human action (stay if none) and the agent's action.
  // Returns the new state message, or an error message when already done.
  nlohmann::json tick();

  bool done() const;
  env::GameState state() const;
  double total_extrinsic() const;
  double total_shaped() const;
  std::vector<env::TrajectoryRecord> records() const;
  // The agent's observation at the most recent tick.
  std::vector<double> last_agent_observation() const;

  void export_trajectory(const std::filesystem::path& path) const;

 private:
  nlohmann::json state_message_locked() const;

  std::string id_;
  SessionConfig config_;
  mutable std::mutex mutex_;
  core::PolicyActor agent_;
  env::GameState state_;
  std::optional<env::Action> pending_;
  std::int64_t pending_seq_ = -1;
  std::int64_t max_seq_ = -1;
  std::int64_t applied_seq_ = -1;
  double total_extrinsic_ = 0.0;
  double total_shaped_ = 0.0;
  env::StepResult last_step_;
  bool stepped_ = false;
  std::vector<env::TrajectoryRecord> records_;
};

// Short random hex id.
std::string new_session_id(Rng& rng);

}  // namespace iad::play
