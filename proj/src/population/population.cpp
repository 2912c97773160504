#include "iad/population/population.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>

#include "iad/common/error.hpp"
#include "iad/common/io.hpp"
#include "iad/core/episode.hpp"
#include "iad/env/observation.hpp"
#include "iad/grad/checkpoint.hpp"

namespace iad::population {

namespace fs = std::filesystem;
using nlohmann::json;

const char* stage_name(Stage stage) {
  switch (stage) {
    case Stage::kEarly:
      return "early";
    case Stage::kIntermediate:
      return "intermediate";
    case Stage::kFinal:
      return "final";
  }
  return "final";
}

Stage parse_stage(const std::string& name) {
  if (name == "early") return Stage::kEarly;
  if (name == "intermediate") return Stage::kIntermediate;
  if (name == "final") return Stage::kFinal;
  throw ConfigError("unknown stage '" + name + "' (expected early, intermediate or final)");
}

double stage_fraction(Stage stage) {
  switch (stage) {
    case Stage::kEarly:
      return 0.1;
    case Stage::kIntermediate:
      return 0.5;
    case Stage::kFinal:
      return 1.0;
  }
  return 1.0;
}

json population_to_json(const PartnerPopulation& population) {
  json records = json::array();
  for (const PartnerRecord& r : population.records) {
    records.push_back({{"id", r.id},
                       {"checkpoint", r.checkpoint.generic_string()},
                       {"stage", stage_name(r.stage)},
                       {"seed", r.seed},
                       {"layout", r.layout},
                       {"digest", r.digest},
                       {"summary",
                        {{"training_return", r.summary.training_return},
                         {"steps", r.summary.steps},
                         {"eval_mean", r.summary.eval_mean},
                         {"eval_std", r.summary.eval_std},
                         {"eval_se", r.summary.eval_se},
                         {"eval_episodes", r.summary.eval_episodes}}}});
  }
  return {{"kind", "partner_population"},
          {"tag", population.tag},
          {"sampling", "uniform"},
          {"records", records},
          {"stage_order_flags", population.stage_order_flags}};
}

PartnerPopulation population_from_json(const json& j) {
  if (j.value("kind", std::string()) != "partner_population") {
    throw ConfigError("not a partner population manifest");
  }
  PartnerPopulation p;
  p.tag = j.at("tag").get<std::string>();
  for (const json& r : j.at("records")) {
    PartnerRecord rec;
    rec.id = r.at("id").get<std::string>();
    rec.checkpoint = r.at("checkpoint").get<std::string>();
    rec.stage = parse_stage(r.at("stage").get<std::string>());
    rec.seed = r.at("seed").get<std::uint64_t>();
    rec.layout = r.at("layout").get<std::string>();
    rec.digest = r.at("digest").get<std::string>();
    const json& s = r.at("summary");
    rec.summary.training_return = s.value("training_return", 0.0);
    rec.summary.steps = s.value("steps", std::int64_t{0});
    rec.summary.eval_mean = s.value("eval_mean", 0.0);
    rec.summary.eval_std = s.value("eval_std", 0.0);
    rec.summary.eval_se = s.value("eval_se", 0.0);
    rec.summary.eval_episodes = s.value("eval_episodes", 0);
    p.records.push_back(std::move(rec));
  }
  if (j.contains("stage_order_flags")) {
    p.stage_order_flags = j["stage_order_flags"].get<std::vector<std::string>>();
  }
  return p;
}

void save_manifest(const fs::path& path, const PartnerPopulation& population) {
  PartnerPopulation relative = population;
  const fs::path base = fs::absolute(path).parent_path();
  for (PartnerRecord& r : relative.records) {
    if (r.checkpoint.is_absolute()) r.checkpoint = fs::relative(r.checkpoint, base);
  }
  write_file_atomic(path, population_to_json(relative).dump(2) + "\n");
}

PartnerPopulation load_manifest(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  PartnerPopulation p;
  try {
    p = population_from_json(j);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  const fs::path base = fs::absolute(path).parent_path();
  for (PartnerRecord& r : p.records) {
    if (r.checkpoint.is_relative()) r.checkpoint = (base / r.checkpoint).lexically_normal();
    if (!fs::exists(r.checkpoint)) {
      throw ConfigError(path.string() + ": record " + r.id + ": checkpoint " +
                        r.checkpoint.string() + " does not exist");
    }
  }
  return p;
}

const PartnerRecord& sample_partner(const PartnerPopulation& population, Rng& rng) {
  if (population.empty()) throw ConfigError("cannot sample from an empty partner population");
  return population.records[uniform_index(rng, population.size())];
}

core::PartnerPool load_partner_pool(const PartnerPopulation& population,
                                    const env::LayoutSpec& layout) {
  if (population.empty()) throw ConfigError("partner population is empty");
  core::PartnerPool pool;
  for (const PartnerRecord& r : population.records) {
    try {
      if (!r.digest.empty() && grad::file_checksum(r.checkpoint) != r.digest) {
        throw ConfigError("checkpoint digest differs from the manifest");
      }
      auto policy = std::make_shared<policy::HierarchicalPolicy>(policy::load_policy(r.checkpoint));
      policy::check_compatible(policy->config(), env::kObservationChannels, layout.height,
                               layout.width);
      pool.partners.push_back({r.id, std::move(policy)});
    } catch (const std::runtime_error& e) {
      throw ConfigError("partner " + r.id + " (" + r.checkpoint.string() + "): " + e.what());
    }
  }
  return pool;
}

void check_disjoint(const PartnerPopulation& a, const PartnerPopulation& b) {
  if (a.tag == b.tag) throw ConfigError("both populations are tagged '" + a.tag + "'");
  std::set<std::string> seen;
  for (const PartnerRecord& r : a.records) seen.insert(r.digest);
  for (const PartnerRecord& r : b.records) {
    if (seen.count(r.digest) > 0) {
      throw ConfigError("populations '" + a.tag + "' and '" + b.tag + "' share checkpoint " +
                        r.digest + " (" + r.id + ")");
    }
  }
}

PartnerPopulation train_population(const PopulationConfig& config, const fs::path& out_dir,
                                   bool force,
                                   const std::function<void(const PopulationProgress&)>& on_update) {
  if (config.seeds.empty()) throw ConfigError("population needs at least one agent seed");
  if (std::set<std::uint64_t>(config.seeds.begin(), config.seeds.end()).size() != config.seeds.size()) {
    throw ConfigError("population seeds must be distinct");
  }
  if (config.jsd_weight < 0.0) throw ConfigError("jsd_weight must be >= 0");
  if (config.summary_episodes < 1) throw ConfigError("summary_episodes must be >= 1");
  const fs::path manifest = out_dir / "population.json";
  ensure_writable(manifest, force);

  PartnerPopulation population;
  population.tag = config.tag;
  std::vector<core::PolicyPtr> finals;

  for (std::size_t i = 0; i < config.seeds.size(); ++i) {
    core::TrainConfig cfg = config.base;
    cfg.mode = core::TrainMode::kFlat;
    cfg.num_skills = 1;
    cfg.partners = "self_play";
    cfg.seed = config.seeds[i];
    cfg.jsd_weight = finals.empty() ? 0.0 : config.jsd_weight;
    cfg.jsd_references.clear();
    const std::string agent = "agent_" + std::to_string(i);
    const fs::path agent_dir = out_dir / agent;
    for (const PartnerRecord& r : population.records) {
      if (r.stage == Stage::kFinal) cfg.jsd_references.push_back(fs::absolute(r.checkpoint).string());
    }

    core::Trainer trainer(cfg, {}, finals);
    std::array<bool, 3> saved{false, false, false};
    std::array<PartnerRecord, 3> stage_records;
    auto save_stage = [&](Stage stage, const core::UpdateMetrics* m) {
      const auto k = static_cast<std::size_t>(stage);
      if (saved[k]) return;
      const fs::path path = agent_dir / (std::string(stage_name(stage)) + ".ckpt");
      PartnerRecord& rec = stage_records[k];
      rec.id = agent + "_" + stage_name(stage);
      rec.checkpoint = fs::absolute(path);
      rec.stage = stage;
      rec.seed = cfg.seed;
      rec.layout = trainer.layout().name;
      rec.summary.steps = trainer.steps_done();
      rec.summary.training_return = m != nullptr ? m->mean_return : 0.0;
      rec.digest = policy::save_policy(path, trainer.policy(),
                                       {{"stage", stage_name(stage)},
                                        {"seed", cfg.seed},
                                        {"steps", trainer.steps_done()},
                                        {"layout", trainer.layout().name},
                                        {"population", config.tag}});
      saved[k] = true;
    };

    core::UpdateMetrics last;
    core::TrainRunOptions opts;
    opts.out_dir = agent_dir;
    opts.force = force;
    opts.on_update = [&](const core::UpdateMetrics& m) {
      last = m;
      for (Stage s : {Stage::kEarly, Stage::kIntermediate}) {
        const double at = stage_fraction(s) * static_cast<double>(cfg.hp.total_steps);
        if (static_cast<double>(m.steps) >= at) save_stage(s, &m);
      }
      if (on_update) on_update({static_cast<int>(i), &m});
    };
    core::run_training(trainer, opts);
    // An early stop can skip stage thresholds; those stages get the final weights.
    for (Stage s : {Stage::kEarly, Stage::kIntermediate, Stage::kFinal}) save_stage(s, &last);

    double previous_mean = 0.0, previous_se = 0.0;
    for (Stage s : {Stage::kEarly, Stage::kIntermediate, Stage::kFinal}) {
      PartnerRecord& rec = stage_records[static_cast<std::size_t>(s)];
      auto policy = std::make_shared<policy::HierarchicalPolicy>(policy::load_policy(rec.checkpoint));
      const core::ActorFactory actor = core::policy_factory(policy);
      const core::ReturnStats stats = core::evaluate_pair(trainer.layout(), actor, actor,
                                                          config.summary_episodes,
                                                          derive_seed(cfg.seed, 100));
      rec.summary.eval_mean = stats.mean;
      rec.summary.eval_std = stats.stddev;
      rec.summary.eval_se = stats.standard_error;
      rec.summary.eval_episodes = config.summary_episodes;
      if (s != Stage::kEarly && stats.mean < previous_mean - std::max(previous_se, stats.standard_error)) {
        population.stage_order_flags.push_back(rec.id);
      }
      previous_mean = stats.mean;
      previous_se = stats.standard_error;
      if (s == Stage::kFinal) finals.push_back(policy);
      population.records.push_back(rec);
    }
  }
  save_manifest(manifest, population);
  return load_manifest(manifest);
}

}  // namespace iad::population
