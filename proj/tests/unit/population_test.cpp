#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "../support/demonstrations.hpp"
#include "../support/scripted.hpp"
#include "iad/common/error.hpp"
#include "iad/common/io.hpp"
#include "iad/core/rollout.hpp"
#include "iad/grad/checkpoint.hpp"
#include "iad/population/bc.hpp"
#include "iad/population/evaluation.hpp"
#include "iad/population/pairwise.hpp"
#include "iad/population/population.hpp"

using namespace iad;
using namespace iad::population;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("iad_population_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

PopulationConfig tiny_population(std::vector<std::uint64_t> seeds, const std::string& tag) {
  PopulationConfig c;
  c.base.layouts_dir = iad::testing::layouts_dir();
  c.base.layout = "cramped_room_mini";
  c.base.conv_channels = {4, 4, 4};
  c.base.dense = {8, 8};
  c.base.recurrent = 8;
  c.base.hp.n_envs = 2;
  c.base.hp.horizon = 10;
  c.base.hp.minibatch_steps = 5;
  c.base.hp.epochs = 1;
  c.base.hp.total_steps = 10 * 2 * 10;
  c.seeds = std::move(seeds);
  c.tag = tag;
  c.summary_episodes = 2;
  return c;
}

// Built once; several tests read it.
const PartnerPopulation& shared_population() {
  static const PartnerPopulation pop = [] {
    return train_population(tiny_population({7, 8}, "train"), fresh_dir("shared"));
  }();
  return pop;
}

env::LayoutSpec short_layout(int horizon) {
  env::LayoutSpec l = iad::testing::shipped_layout("cramped_room_mini");
  l.horizon = horizon;
  return l;
}

BcConfig small_bc() {
  BcConfig c;
  c.layouts_dir = iad::testing::layouts_dir();
  c.conv_channels = {4, 4, 4};
  c.dense = {16, 16};
  c.recurrent = 16;
  c.seed = 3;
  return c;
}

}  // namespace

TEST(Stages, NamesRoundTrip) {
  for (Stage s : {Stage::kEarly, Stage::kIntermediate, Stage::kFinal}) {
    EXPECT_EQ(parse_stage(stage_name(s)), s);
  }
  EXPECT_THROW(parse_stage("late"), ConfigError);
  EXPECT_EQ(stage_fraction(Stage::kEarly), 0.1);
  EXPECT_EQ(stage_fraction(Stage::kIntermediate), 0.5);
}

TEST(TrainPopulation, OneAgentGivesThreeStageRecords) {
  const fs::path dir = fresh_dir("one");
  const PartnerPopulation pop = train_population(tiny_population({5}, "train"), dir);
  ASSERT_EQ(pop.size(), 3u);
  EXPECT_EQ(pop.records[0].stage, Stage::kEarly);
  EXPECT_EQ(pop.records[1].stage, Stage::kIntermediate);
  EXPECT_EQ(pop.records[2].stage, Stage::kFinal);
  EXPECT_EQ(pop.records[0].summary.steps, 20);   // first update at or past 10%
  EXPECT_EQ(pop.records[1].summary.steps, 100);  // 50%
  EXPECT_EQ(pop.records[2].summary.steps, 200);
  std::set<std::string> digests;
  for (const PartnerRecord& r : pop.records) {
    EXPECT_TRUE(fs::exists(r.checkpoint));
    EXPECT_EQ(r.seed, 5u);
    EXPECT_EQ(r.layout, "cramped_room_mini");
    EXPECT_EQ(r.summary.eval_episodes, 2);
    digests.insert(r.digest);
  }
  EXPECT_EQ(digests.size(), 3u);
  EXPECT_TRUE(fs::exists(dir / "population.json"));
  EXPECT_TRUE(fs::exists(dir / "agent_0" / "metrics.jsonl"));
  // The manifest is not overwritten without force.
  EXPECT_THROW(train_population(tiny_population({5}, "train"), dir), ConfigError);
}

TEST(TrainPopulation, LaterAgentsCarryTheStyleBonus) {
  const PartnerPopulation& pop = shared_population();
  ASSERT_EQ(pop.size(), 6u);
  const fs::path dir = pop.records[0].checkpoint.parent_path().parent_path();
  std::ifstream first(dir / "agent_0" / "metrics.jsonl"), second(dir / "agent_1" / "metrics.jsonl");
  std::string line;
  std::getline(first, line);
  EXPECT_EQ(nlohmann::json::parse(line)["mean_bonus"].get<double>(), 0.0);
  std::getline(second, line);
  EXPECT_GT(nlohmann::json::parse(line)["mean_bonus"].get<double>(), 0.0);
  const std::string config = read_text_file(dir / "agent_1" / "config.kv");
  EXPECT_NE(config.find("jsd_weight = 0.1"), std::string::npos) << config;
}

TEST(TrainPopulation, RejectsBadSettings) {
  const fs::path dir = fresh_dir("bad");
  EXPECT_THROW(train_population(tiny_population({}, "train"), dir), ConfigError);
  EXPECT_THROW(train_population(tiny_population({1, 1}, "train"), dir), ConfigError);
  PopulationConfig c = tiny_population({1}, "train");
  c.base.layout = "no_such_layout";
  EXPECT_THROW(train_population(c, dir), ConfigError);
}

TEST(Manifest, RoundTripsWithRelativePaths) {
  const PartnerPopulation& pop = shared_population();
  const fs::path dir = pop.records[0].checkpoint.parent_path().parent_path();
  const std::string text = read_text_file(dir / "population.json");
  EXPECT_NE(text.find("\"agent_0/early.ckpt\""), std::string::npos);
  const PartnerPopulation back = load_manifest(dir / "population.json");
  EXPECT_EQ(nlohmann::json(population_to_json(back)), nlohmann::json(population_to_json(pop)));
  const core::PartnerPool pool = load_partner_pool(back, short_layout(10));
  EXPECT_EQ(pool.partners.size(), 6u);
  EXPECT_EQ(pool.partners[5].id, "agent_1_final");
}

TEST(Manifest, LoadFailuresNameTheRecord) {
  const PartnerPopulation& pop = shared_population();
  const fs::path dir = fresh_dir("tamper");
  PartnerPopulation copy = pop;
  fs::copy_file(pop.records[1].checkpoint, dir / "x.ckpt");
  fs::copy_file(grad::manifest_path(pop.records[1].checkpoint), dir / "x.ckpt.json");
  copy.records = {pop.records[1]};
  copy.records[0].checkpoint = dir / "x.ckpt";
  copy.records[0].digest = "0000000000000000";
  try {
    load_partner_pool(copy, short_layout(10));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("agent_0_intermediate"), std::string::npos) << e.what();
  }
  copy.records[0].digest = pop.records[1].digest;
  EXPECT_NO_THROW(load_partner_pool(copy, short_layout(10)));
  EXPECT_THROW(load_partner_pool(copy, iad::testing::shipped_layout("counter_circuit_mini")),
               ConfigError);
  save_manifest(dir / "population.json", copy);
  fs::remove(dir / "x.ckpt");
  EXPECT_THROW(load_manifest(dir / "population.json"), ConfigError);
  EXPECT_THROW(load_partner_pool(PartnerPopulation{}, short_layout(10)), ConfigError);
}

TEST(SamplePartner, UniformAndDeterministic) {
  PartnerPopulation pop;
  for (int i = 0; i < 4; ++i) {
    PartnerRecord r;
    r.id = "p" + std::to_string(i);
    pop.records.push_back(r);
  }
  Rng rng(12);
  std::map<std::string, int> counts;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) ++counts[sample_partner(pop, rng).id];
  const double p = 0.25, sigma = std::sqrt(draws * p * (1 - p));
  for (const auto& [id, n] : counts) EXPECT_LE(std::abs(n - draws * p), 3 * sigma) << id;
  EXPECT_EQ(counts.size(), 4u);

  Rng a(99), b(99);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_partner(pop, a).id, sample_partner(pop, b).id);

  PartnerPopulation single;
  single.records.push_back(pop.records[2]);
  single.records[0].id = "only";
  for (int i = 0; i < 50; ++i) EXPECT_EQ(sample_partner(single, rng).id, "only");
  EXPECT_THROW(sample_partner(PartnerPopulation{}, rng), ConfigError);
}

TEST(Disjointness, SeparateSeedSetsShareNoCheckpoint) {
  const PartnerPopulation& train = shared_population();
  const PartnerPopulation eval = train_population(tiny_population({17}, "eval"), fresh_dir("eval"));
  EXPECT_NO_THROW(check_disjoint(train, eval));
  EXPECT_THROW(check_disjoint(train, train), ConfigError);
  PartnerPopulation relabeled = train;
  relabeled.tag = "eval";
  EXPECT_THROW(check_disjoint(train, relabeled), ConfigError);
}

TEST(StyleBonus, IdenticalReferenceGivesZero) {
  const env::LayoutSpec layout = short_layout(12);
  policy::PolicyConfig pc;
  pc.num_skills = 1;
  pc.height = layout.height;
  pc.width = layout.width;
  pc.conv_channels = {4, 4, 4};
  pc.dense = {8, 8};
  pc.recurrent = 8;
  policy::HierarchicalPolicy learner(pc, 1), other(pc, 2);
  const policy::HierarchicalPolicy twin = learner.clone();
  core::RolloutSettings s;
  s.layout = &layout;
  s.n_envs = 2;
  s.jsd_weight = 0.1;
  s.jsd_references = {&twin};
  core::RolloutRngs rngs = core::RolloutRngs::from_seed(1);
  for (const core::Track& t : core::collect_rollout(learner, {}, s, rngs, 0).tracks) {
    for (double b : t.reward_bonus) ASSERT_NEAR(b, 0.0, 1e-15);
  }
  s.jsd_references = {&other};
  double total = 0.0;
  for (const core::Track& t : core::collect_rollout(learner, {}, s, rngs, 0).tracks) {
    for (double b : t.reward_bonus) {
      ASSERT_GE(b, 0.0);
      ASSERT_LE(b, 0.1 * std::log(2.0) + 1e-15);
      total += b;
    }
  }
  EXPECT_GT(total, 0.0);
}

TEST(PairwiseMatrix, ShapeCsvAndPlotData) {
  const PartnerPopulation& pop = shared_population();
  PartnerPopulation two = pop;
  two.records = {pop.records[2], pop.records[5]};
  const ReturnMatrix m = pairwise_matrix(two, short_layout(40), 2, 4);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m.episodes, 2);
  EXPECT_EQ(m.horizon, 40);
  const std::string csv = matrix_to_csv(m);
  const auto lines = split(trim(csv), '\n');
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[0], "partner,agent_0_final,agent_1_final");
  for (std::size_t i = 1; i < 3; ++i) EXPECT_EQ(split(lines[i], ',').size(), 3u);

  const fs::path dir = fresh_dir("matrix");
  write_matrix(m, dir / "pairwise");
  EXPECT_TRUE(fs::exists(dir / "pairwise.csv"));
  EXPECT_TRUE(fs::exists(dir / "pairwise.svg"));
  const auto plot = nlohmann::json::parse(read_text_file(dir / "pairwise.json"));
  EXPECT_EQ(plot["mean"][0][1].get<double>(), m.mean[0][1]);

  // Same seed, same numbers.
  EXPECT_EQ(pairwise_matrix(two, short_layout(40), 2, 4).mean, m.mean);
  EXPECT_THROW(pairwise_matrix(two, short_layout(40), 0, 4), ConfigError);
}

TEST(PairwiseMatrix, SingleAgentDiagonalIsSelfPlay) {
  PartnerPopulation one = shared_population();
  one.records = {one.records[2]};
  const env::LayoutSpec layout = short_layout(50);
  const ReturnMatrix m = pairwise_matrix(one, layout, 5, 21);
  auto policy = std::make_shared<policy::HierarchicalPolicy>(policy::load_policy(one.records[0].checkpoint));
  const auto actor = core::policy_factory(policy);
  EXPECT_EQ(m.mean[0][0], core::evaluate_pair(layout, actor, actor, 5, derive_seed(21, 0)).mean);
}

TEST(Evaluation, ReportsPerPartnerPerSeatAndPerStage) {
  const PartnerPopulation& pop = shared_population();
  const env::LayoutSpec layout = short_layout(20);
  const core::ActorFactory random = [](std::uint64_t s) {
    return std::make_unique<core::RandomActor>(s);
  };
  const EvaluationReport r = evaluate_against_population(random, "random", pop, layout, 3, 5);
  ASSERT_EQ(r.partners.size(), 6u);
  ASSERT_EQ(r.groups.size(), 4u);
  EXPECT_EQ(r.groups[0].name, "all");
  EXPECT_EQ(r.groups[0].stats.returns.size(), 36u);
  for (const PartnerResult& p : r.partners) {
    EXPECT_EQ(p.as_blue.returns.size(), 3u);
    EXPECT_NEAR((p.as_blue.mean + p.as_green.mean) / 2, p.stats.mean, 1e-12);
  }
  double pooled = 0.0;
  for (std::size_t g = 1; g < 4; ++g) {
    EXPECT_EQ(r.groups[g].partners, 2);
    pooled += r.groups[g].stats.mean / 3;
  }
  EXPECT_NEAR(pooled, r.overall().stats.mean, 1e-12);
  const auto lines = split(trim(r.to_csv()), '\n');
  EXPECT_EQ(lines.size(), 1u + 6u + 4u);
  EXPECT_EQ(r.to_json()["groups"][0]["episodes"], 36);
}

TEST(BehaviorCloning, ConstantActionIsLearned) {
  const env::LayoutSpec layout = short_layout(40);
  std::vector<env::TrajectoryRecord> records;
  for (int ep = 0; ep < 2; ++ep) {
    env::GameState s = env::reset(layout);
    while (!s.done) {
      const std::array<env::Action, 2> a = {env::Action::kInteract, env::Action::kStay};
      env::StepResult res = env::step(layout, s, a[0], a[1]);
      records.push_back(env::make_record(layout, s, a, res, 0));
      s = res.next;
    }
  }
  const auto demos = demonstrations_from_records(layout, records, "constant");
  ASSERT_EQ(demos.size(), 2u);
  BcConfig cfg = small_bc();
  cfg.epochs = 30;
  cfg.lr = 3e-3;
  const BcResult r = fit_bc(layout, demos, cfg);
  EXPECT_EQ(r.train_accuracy, 1.0);
  EXPECT_EQ(r.heldout_accuracy.back(), 1.0);
  EXPECT_LT(r.epoch_loss.back(), r.epoch_loss.front());
}

TEST(BehaviorCloning, RecordsWithoutHumanUseBothSeats) {
  const env::LayoutSpec layout = short_layout(30);
  auto records = iad::testing::heuristic_session(layout, 1, 4);
  for (auto& r : records) r.human.reset();
  const auto demos = demonstrations_from_records(layout, records, "both");
  ASSERT_EQ(demos.size(), 2u);
  EXPECT_EQ(demos[0].seat, 0);
  EXPECT_EQ(demos[1].seat, 1);
  EXPECT_EQ(demos[1].actions[3], static_cast<std::size_t>(env::action_index(records[3].actions[1])));
}

TEST(BehaviorCloning, FiveHundredStepSession) {
  const env::LayoutSpec layout = iad::testing::shipped_layout("cramped_room_mini");
  const auto records = iad::testing::heuristic_session(layout, 500 / layout.horizon, 11);
  ASSERT_EQ(records.size(), 500u);
  const fs::path dir = fresh_dir("bc");
  env::write_trajectory(dir / "session.jsonl", records);
  BcConfig cfg = small_bc();
  cfg.epochs = 8;
  const BcRun run = train_bc({dir / "session.jsonl"}, cfg, dir / "bc.ckpt");
  const auto& loss = run.result.epoch_loss;
  for (std::size_t e = 1; e < 5; ++e) EXPECT_LT(loss[e], loss[e - 1]) << "epoch " << e;
  EXPECT_GT(run.result.heldout_accuracy.back(), 1.0 / 6.0);
  EXPECT_EQ(run.result.train_steps + run.result.heldout_steps, 500u);
  EXPECT_EQ(run.record.layout, "cramped_room_mini");
  const policy::HierarchicalPolicy loaded = policy::load_policy(dir / "bc.ckpt");
  EXPECT_EQ(loaded.config().num_skills, 1);
  EXPECT_THROW(train_bc({dir / "session.jsonl"}, cfg, dir / "bc.ckpt"), ConfigError);
}

TEST(BehaviorCloning, BadLogsNameFileAndLine) {
  const fs::path dir = fresh_dir("bad_logs");
  write_file_atomic(dir / "empty.jsonl", "");
  write_file_atomic(dir / "garbage.jsonl", "{\"t\": 0}\nnot json\n");
  const BcConfig cfg = small_bc();
  try {
    train_bc({dir / "empty.jsonl"}, cfg, dir / "a.ckpt");
    FAIL();
  } catch (const IngestionError& e) {
    EXPECT_EQ(e.file(), (dir / "empty.jsonl").string());
  }
  try {
    train_bc({dir / "garbage.jsonl"}, cfg, dir / "b.ckpt");
    FAIL();
  } catch (const IngestionError& e) {
    EXPECT_EQ(e.line(), 1u) << e.what();
  }
  EXPECT_THROW(train_bc({}, cfg, dir / "c.ckpt"), ConfigError);
  EXPECT_THROW(train_bc({dir / "missing.jsonl"}, cfg, dir / "d.ckpt"), std::runtime_error);
}
