#include "iad/play/session.hpp"

#include "iad/common/digest.hpp"
#include "iad/common/error.hpp"
#include "iad/env/observation.hpp"

namespace iad::play {

namespace {

const SessionConfig& checked(const SessionConfig& config) {
  if (!config.policy) throw ConfigError("session has no agent policy");
  if (config.human != env::kBlue && config.human != env::kGreen) {
    throw ConfigError("human side must be blue or green");
  }
  if (config.tick_ms < 1) throw ConfigError("tick_ms must be >= 1");
  policy::check_compatible(config.policy->config(), env::kObservationChannels,
                           config.layout.height, config.layout.width);
  return config;
}

}  // namespace

Session::Session(std::string id, SessionConfig config)
    : id_(std::move(id)),
      config_(checked(config)),
      agent_(config_.policy, config_.seed),
      state_(env::reset(config_.layout)) {}

nlohmann::json Session::state_message() const {
  std::lock_guard lock(mutex_);
  return state_message_locked();
}

nlohmann::json Session::state_message_locked() const {
  StateView v;
  v.session = id_;
  v.layout = &config_.layout;
  v.state = &state_;
  v.human = config_.human;
  v.total_extrinsic = total_extrinsic_;
  v.total_shaped = total_shaped_;
  if (stepped_) {
    v.step_extrinsic = last_step_.reward_extrinsic;
    v.step_shaped = last_step_.reward_shaped;
    v.events = last_step_.events;
    if (config_.show_skill) {
      v.active_skill = agent_.active_skill();
      v.skill_changed = agent_.skill_is_new();
    }
  }
  v.last_seq = applied_seq_;
  return play::state_message(v);
}

std::optional<nlohmann::json> Session::submit(env::Action action, std::int64_t seq) {
  std::lock_guard lock(mutex_);
  if (state_.done) return error_message("session " + id_ + " is done; action ignored");
  if (seq <= max_seq_) {
    return error_message("seq " + std::to_string(seq) + " is not larger than " +
                         std::to_string(max_seq_) + "; action ignored");
  }
  max_seq_ = seq;
  pending_ = action;
  pending_seq_ = seq;
  return std::nullopt;
}

nlohmann::json Session::tick() {
  std::lock_guard lock(mutex_);
  if (state_.done) return error_message("session " + id_ + " is done");
  const int agent_seat = 1 - config_.human;
  const env::Action agent_action = agent_.act(config_.layout, state_, agent_seat);
  const env::Action human_action = pending_.value_or(env::Action::kStay);
  if (pending_) applied_seq_ = pending_seq_;
  pending_.reset();

  std::array<env::Action, env::kNumPlayers> actions;
  actions[static_cast<std::size_t>(config_.human)] = human_action;
  actions[static_cast<std::size_t>(agent_seat)] = agent_action;
  env::StepResult res = env::step(config_.layout, state_, actions[0], actions[1]);
  records_.push_back(env::make_record(config_.layout, state_, actions, res, config_.human,
                                      agent_.active_skill(), agent_.skill_is_new()));
  total_extrinsic_ += res.reward_extrinsic;
  total_shaped_ += res.reward_shaped;
  state_ = res.next;
  last_step_ = std::move(res);
  stepped_ = true;
  return state_message_locked();
}

bool Session::done() const {
  std::lock_guard lock(mutex_);
  return state_.done;
}

env::GameState Session::state() const {
  std::lock_guard lock(mutex_);
  return state_;
}

double Session::total_extrinsic() const {
  std::lock_guard lock(mutex_);
  return total_extrinsic_;
}

double Session::total_shaped() const {
  std::lock_guard lock(mutex_);
  return total_shaped_;
}

std::vector<env::TrajectoryRecord> Session::records() const {
  std::lock_guard lock(mutex_);
  return records_;
}

std::vector<double> Session::last_agent_observation() const {
  std::lock_guard lock(mutex_);
  return agent_.last_observation();
}

void Session::export_trajectory(const std::filesystem::path& path) const {
  env::write_trajectory(path, records());
}

std::string new_session_id(Rng& rng) {
  Fnv1a h;
  h.update_u64(rng());
  return h.hex().substr(0, 12);
}

}  // namespace iad::play
