#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "iad/common/random.hpp"
#include "iad/core/config.hpp"
#include "iad/core/rollout.hpp"
#include "iad/core/trainer.hpp"

namespace iad::population {

enum class Stage { kEarly, kIntermediate, kFinal };
const char* stage_name(Stage stage);
Stage parse_stage(const std::string& name);

// Fraction of the step budget at which each stage checkpoint is taken.
double stage_fraction(Stage stage);

struct ReturnSummary {
  double training_return = 0.0;  // mean training return of the update that produced the checkpoint
  std::int64_t steps = 0;
  double eval_mean = 0.0;  // self-play evaluation
  double eval_std = 0.0;
  double eval_se = 0.0;
  int eval_episodes = 0;  // per seat
};

struct PartnerRecord {
  std::string id;
  std::filesystem::path checkpoint;  // relative to the manifest directory when saved
  Stage stage = Stage::kFinal;
  std::uint64_t seed = 0;
  std::string layout;
  ReturnSummary summary;
  std::string digest;  // checkpoint checksum
};

struct PartnerPopulation {
  std::string tag;  // e.g. "train" or "eval"; populations with different tags never mix
  std::vector<PartnerRecord> records;
  // Agents whose evaluation return dropped from one stage to the next by more
  // than a standard error. Reported, not enforced.
  std::vector<std::string> stage_order_flags;

  bool empty() const { return records.empty(); }
  std::size_t size() const { return records.size(); }
};

nlohmann::json population_to_json(const PartnerPopulation& population);
PartnerPopulation population_from_json(const nlohmann::json& j);

// Checkpoint paths inside the manifest are stored relative to its directory
// and resolved against it on load. Loading verifies that every checkpoint
// exists; digests are checked by load_partner_pool.
void save_manifest(const std::filesystem::path& path, const PartnerPopulation& population);
PartnerPopulation load_manifest(const std::filesystem::path& path);

// Uniform draw. Throws ConfigError on an empty population.
const PartnerRecord& sample_partner(const PartnerPopulation& population, Rng& rng);

// Loads every record's policy. Throws ConfigError naming the record when a
// checkpoint is missing, corrupt, has a different digest than the manifest
// or cannot read the layout's observations.
core::PartnerPool load_partner_pool(const PartnerPopulation& population,
                                    const env::LayoutSpec& layout);

// Throws ConfigError when the two populations share a tag or a checkpoint.
void check_disjoint(const PartnerPopulation& a, const PartnerPopulation& b);

struct PopulationConfig {
  // Architecture, layout, budget and PPO settings for every member. Mode,
  // skill count, partners and seed are overridden per agent.
  core::TrainConfig base;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4};
  std::string tag = "train";
  double jsd_weight = 0.1;
  int summary_episodes = 10;
};

struct PopulationProgress {
  int agent = 0;
  const core::UpdateMetrics* metrics = nullptr;
};

// Trains one flat self-play agent per seed, in order. Each agent after the
// first gets a per-step bonus of jsd_weight * JSD between its action
// distribution and those of the earlier agents' final policies. Writes under
// `out_dir`: agent_<i>/ (trainer outputs), agent_<i>/<stage>.ckpt and
// population.json. Returns the manifest contents.
PartnerPopulation train_population(const PopulationConfig& config,
                                   const std::filesystem::path& out_dir, bool force = false,
                                   const std::function<void(const PopulationProgress&)>& on_update = {});

}  // namespace iad::population
