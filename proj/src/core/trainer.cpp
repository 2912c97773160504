#include "iad/core/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "iad/common/error.hpp"
#include "iad/common/io.hpp"
#include "iad/env/observation.hpp"
#include "iad/grad/checkpoint.hpp"

namespace iad::core {

namespace {

constexpr const char* kStateKind = "trainer_state";

env::LayoutSpec training_layout(const TrainConfig& config) {
  env::LayoutSpec layout = env::resolve_layout(config.layout, config.layouts_dir);
  if (config.hp.horizon > 0) layout.horizon = config.hp.horizon;
  return layout;
}

policy::PolicyConfig policy_config_for(const TrainConfig& config, const env::LayoutSpec& layout) {
  config.validate();
  return config.policy_config(env::kObservationChannels, layout.height, layout.width);
}

}  // namespace

nlohmann::json UpdateMetrics::to_json() const {
  return {{"update", update},
          {"steps", steps},
          {"tau", tau},
          {"lr", lr},
          {"entropy_coef", entropy_coef},
          {"mean_return", mean_return},
          {"return_std", return_std},
          {"mean_extrinsic", mean_extrinsic},
          {"mean_intrinsic", mean_intrinsic},
          {"mean_bonus", mean_bonus},
          {"skill_counts", skill_counts},
          {"mean_segment_length", mean_segment_length},
          {"min_segment_length", min_segment_length},
          {"max_segment_length", max_segment_length},
          {"segments_per_episode", segments_per_episode},
          {"losses", losses.to_json()},
          {"seconds", seconds}};
}

Trainer::Trainer(TrainConfig config, PartnerPool partners, std::vector<PolicyPtr> jsd_references)
    : config_(std::move(config)),
      layout_(training_layout(config_)),
      partners_(std::move(partners)),
      jsd_references_(std::move(jsd_references)),
      policy_(policy_config_for(config_, layout_), derive_seed(config_.seed, 1)),
      adam_(grad::AdamState::for_parameters(policy_.parameters())),
      lr_(config_.hp.lr ? *config_.hp.lr : layout_learning_rate(layout_.name)),
      rngs_(RolloutRngs::from_seed(derive_seed(config_.seed, 2))),
      shuffle_rng_(derive_seed(config_.seed, 3)) {
  if (!config_.self_play() && partners_.empty()) {
    throw ConfigError("partner population is empty");
  }
  for (const Partner& p : partners_.partners) {
    try {
      policy::check_compatible(p.policy->config(), env::kObservationChannels, layout_.height,
                               layout_.width);
    } catch (const ConfigError& e) {
      throw ConfigError("partner " + p.id + ": " + e.what());
    }
  }
  for (const PolicyPtr& ref : jsd_references_) {
    policy::check_compatible(ref->config(), env::kObservationChannels, layout_.height,
                             layout_.width);
  }
}

double Trainer::tau_now() const {
  if (config_.mode == TrainMode::kFlat) return 0.0;
  return config_.hp.tau.at(steps_, config_.hp.total_steps);
}

double Trainer::lr_now() const { return lr_.schedule().at(steps_, config_.hp.total_steps); }

double Trainer::entropy_now() const {
  return config_.hp.entropy.at(steps_, config_.hp.total_steps);
}

bool Trainer::finished() const { return stopped_early_ || steps_ >= config_.hp.total_steps; }

RolloutSettings Trainer::rollout_settings() const {
  RolloutSettings s;
  s.layout = &layout_;
  s.n_envs = config_.hp.n_envs;
  s.self_play = config_.self_play();
  s.tau = tau_now();
  s.gamma = config_.hp.gamma;
  s.chunk = static_cast<std::size_t>(config_.hp.minibatch_steps);
  s.compute_intrinsic = config_.mode == TrainMode::kIad;
  s.termination = config_.termination_override;
  s.jsd_weight = config_.jsd_weight;
  for (const PolicyPtr& ref : jsd_references_) s.jsd_references.push_back(ref.get());
  return s;
}

UpdateMetrics Trainer::run_update() {
  const auto started = std::chrono::steady_clock::now();
  UpdateMetrics m;
  m.tau = tau_now();
  m.lr = lr_now();
  m.entropy_coef = entropy_now();

  const RolloutBuffers buffers =
      collect_rollout(policy_, partners_, rollout_settings(), rngs_, episodes_);
  ++episodes_;

  const bool high_level = config_.mode == TrainMode::kIad && policy_.num_skills() > 1;
  const AdvantageSet adv = compute_advantages(buffers, config_.hp, high_level);
  UpdateSettings us;
  us.hp = config_.hp;
  us.high_level = high_level;
  us.lr = m.lr;
  us.entropy_coef = m.entropy_coef;
  m.losses = ppo_update(policy_, buffers, adv, us, adam_, shuffle_rng_);

  steps_ += buffers.env_steps;
  ++updates_;
  m.update = updates_;
  m.steps = steps_;

  const double n = static_cast<double>(buffers.tracks.size());
  double sum = 0.0, sum_sq = 0.0, ext = 0.0, intrinsic = 0.0, bonus = 0.0;
  m.skill_counts.assign(policy_.num_skills(), 0);
  std::size_t segments = 0, seg_len_total = 0;
  m.min_segment_length = std::numeric_limits<int>::max();
  for (const Track& tr : buffers.tracks) {
    const double r = tr.task_return();
    sum += r;
    sum_sq += r * r;
    ext += tr.extrinsic_return();
    for (double x : tr.reward_iad) intrinsic += x;
    for (double x : tr.reward_bonus) bonus += x;
    for (int z : tr.skill) ++m.skill_counts[static_cast<std::size_t>(z)];
    for (const SkillSegment& s : tr.segments) {
      ++segments;
      seg_len_total += static_cast<std::size_t>(s.length);
      m.min_segment_length = std::min(m.min_segment_length, s.length);
      m.max_segment_length = std::max(m.max_segment_length, s.length);
    }
  }
  const double steps_total = static_cast<double>(buffers.transition_count());
  m.mean_return = sum / n;
  m.return_std = std::sqrt(std::max(0.0, sum_sq / n - m.mean_return * m.mean_return));
  m.mean_extrinsic = ext / n;
  m.mean_intrinsic = intrinsic / steps_total;
  m.mean_bonus = bonus / steps_total;
  m.mean_segment_length = static_cast<double>(seg_len_total) / static_cast<double>(segments);
  m.segments_per_episode = static_cast<double>(segments) / n;

  recent_returns_.push_back(m.mean_return);
  while (recent_returns_.size() > static_cast<std::size_t>(config_.stop_window)) {
    recent_returns_.pop_front();
  }
  if (config_.stop_at_return > 0.0 &&
      recent_returns_.size() == static_cast<std::size_t>(config_.stop_window)) {
    double window = 0.0;
    for (double r : recent_returns_) window += r;
    if (window / static_cast<double>(recent_returns_.size()) >= config_.stop_at_return) {
      stopped_early_ = true;
    }
  }
  m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return m;
}

void Trainer::save_state(const std::filesystem::path& path) const {
  grad::CheckpointContents contents;
  grad::append_parameters(contents, policy_.parameters(), "policy.");
  for (std::size_t i = 0; i < policy_.parameters().size(); ++i) {
    const std::string& name = policy_.parameters().name(i);
    const grad::Shape& shape = policy_.parameters()[i].shape();
    contents.arrays.push_back({"adam.m." + name, shape, adam_.m[i]});
    contents.arrays.push_back({"adam.v." + name, shape, adam_.v[i]});
  }
  nlohmann::json meta;
  meta["kind"] = kStateKind;
  meta["config"] = config_.to_json();
  meta["policy"] = policy_.config().to_json();
  meta["adam_t"] = adam_.t;
  meta["steps"] = steps_;
  meta["updates"] = updates_;
  meta["episodes"] = episodes_;
  meta["recent_returns"] = std::vector<double>(recent_returns_.begin(), recent_returns_.end());
  meta["stopped_early"] = stopped_early_;
  meta["rng"] = {{"skill", serialize_rng(rngs_.skill)},
                 {"action", serialize_rng(rngs_.action)},
                 {"partner_choice", serialize_rng(rngs_.partner_choice)},
                 {"partner", serialize_rng(rngs_.partner)},
                 {"shuffle", serialize_rng(shuffle_rng_)}};
  contents.metadata = meta;
  grad::save_checkpoint(path, contents);
}

void Trainer::load_state(const std::filesystem::path& path) {
  const grad::CheckpointContents contents = grad::load_checkpoint(path);
  const nlohmann::json& meta = contents.metadata;
  if (meta.value("kind", std::string()) != kStateKind) {
    throw ConfigError(path.string() + " is not a trainer state checkpoint");
  }
  if (policy::PolicyConfig::from_json(meta.at("policy")) != policy_.config()) {
    throw ConfigError(path.string() + " was saved with a different policy configuration");
  }
  grad::restore_parameters(policy_.parameters(), contents, "policy.");
  for (std::size_t i = 0; i < policy_.parameters().size(); ++i) {
    const std::string& name = policy_.parameters().name(i);
    const grad::NamedArray* m = contents.find("adam.m." + name);
    const grad::NamedArray* v = contents.find("adam.v." + name);
    if (m == nullptr || v == nullptr) throw ConfigError(path.string() + ": missing optimizer state for " + name);
    adam_.m[i] = m->data;
    adam_.v[i] = v->data;
  }
  adam_.t = meta.at("adam_t").get<std::int64_t>();
  steps_ = meta.at("steps").get<std::int64_t>();
  updates_ = meta.at("updates").get<int>();
  episodes_ = meta.at("episodes").get<std::uint64_t>();
  const auto recent = meta.at("recent_returns").get<std::vector<double>>();
  recent_returns_.assign(recent.begin(), recent.end());
  stopped_early_ = meta.at("stopped_early").get<bool>();
  const nlohmann::json& rng = meta.at("rng");
  rngs_.skill = deserialize_rng(rng.at("skill").get<std::string>());
  rngs_.action = deserialize_rng(rng.at("action").get<std::string>());
  rngs_.partner_choice = deserialize_rng(rng.at("partner_choice").get<std::string>());
  rngs_.partner = deserialize_rng(rng.at("partner").get<std::string>());
  shuffle_rng_ = deserialize_rng(rng.at("shuffle").get<std::string>());
}

TrainRunResult run_training(Trainer& trainer, const TrainRunOptions& options) {
  namespace fs = std::filesystem;
  const fs::path& dir = options.out_dir;
  TrainRunResult result;
  result.state_path = dir / "state.ckpt";
  result.policy_path = dir / "policy.ckpt";
  const fs::path metrics_path = dir / "metrics.jsonl";

  std::vector<std::string> metric_lines;
  if (options.resume) {
    if (!fs::exists(result.state_path)) {
      throw ConfigError("cannot resume: " + result.state_path.string() + " does not exist");
    }
    trainer.load_state(result.state_path);
    if (fs::exists(metrics_path)) {
      std::istringstream in(read_text_file(metrics_path));
      std::string line;
      // Drop records written after the saved state.
      while (std::getline(in, line) &&
             metric_lines.size() < static_cast<std::size_t>(trainer.updates_done())) {
        if (!trim(line).empty()) metric_lines.push_back(line);
      }
    }
  } else {
    for (const fs::path& p : {metrics_path, result.state_path, result.policy_path}) {
      ensure_writable(p, options.force);
    }
  }
  fs::create_directories(dir);
  write_file_atomic(dir / "config.kv", trainer.config().to_key_values());

  auto write_metrics = [&] {
    std::string text;
    for (const std::string& l : metric_lines) text += l + "\n";
    write_file_atomic(metrics_path, text);
  };
  const int every = trainer.config().checkpoint_every;
  int ran = 0;
  while (!trainer.finished() && (options.max_updates < 0 || ran < options.max_updates)) {
    UpdateMetrics m = trainer.run_update();
    ++ran;
    metric_lines.push_back(m.to_json().dump());
    write_metrics();
    if (every > 0 && m.update % every == 0) {
      fs::create_directories(dir / "checkpoints");
      char name[64];
      std::snprintf(name, sizeof(name), "policy_update_%05d.ckpt", m.update);
      policy::save_policy(dir / "checkpoints" / name, trainer.policy(),
                          {{"steps", m.steps}, {"update", m.update}, {"layout", trainer.layout().name}});
      trainer.save_state(result.state_path);
    }
    if (options.on_update) options.on_update(m);
    result.metrics.push_back(std::move(m));
  }
  write_metrics();
  trainer.save_state(result.state_path);
  policy::save_policy(result.policy_path, trainer.policy(),
                      {{"steps", trainer.steps_done()},
                       {"update", trainer.updates_done()},
                       {"layout", trainer.layout().name},
                       {"mode", train_mode_name(trainer.config().mode)}});
  return result;
}

}  // namespace iad::core
