#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <regex>
#include <sstream>

#include "../support/demonstrations.hpp"
#include "../support/scripted.hpp"
#include "iad/cli/cli.hpp"
#include "iad/common/io.hpp"
#include "iad/core/skill_analysis.hpp"
#include "iad/env/trajectory.hpp"
#include "iad/grad/checkpoint.hpp"
#include "iad/policy/hierarchical_policy.hpp"
#include "iad/population/pairwise.hpp"
#include "iad/population/population.hpp"

using namespace iad;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

CliRun iad_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  CliRun r;
  r.code = cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("iad_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Tiny networks and budgets so a full command runs in a second or two.
const char* kTinyConfig =
    "layout = cramped_room_mini\n"
    "n_envs = 2\n"
    "horizon = 50\n"
    "total_steps = 400\n"
    "minibatch_steps = 25\n"
    "epochs = 2\n"
    "conv_channels = 4,4,4\n"
    "dense = 8,8\n"
    "recurrent = 8\n";

std::vector<std::string> tiny_args(const fs::path& dir) {
  write_file_atomic(dir / "tiny.kv", kTinyConfig);
  return {"--config", (dir / "tiny.kv").string(), "--layouts-dir", iad::testing::layouts_dir().string()};
}

fs::path save_agent(const fs::path& path, int skills, int height = 4, int width = 5) {
  policy::PolicyConfig pc;
  pc.num_skills = skills;
  pc.height = height;
  pc.width = width;
  pc.conv_channels = {4, 4, 4};
  pc.dense = {8, 8};
  pc.recurrent = 8;
  policy::save_policy(path, policy::HierarchicalPolicy(pc, 11));
  return path;
}

std::vector<json> read_jsonl(const fs::path& path) {
  std::vector<json> rows;
  std::istringstream in(read_text_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) rows.push_back(json::parse(line));
  }
  return rows;
}

std::size_t csv_rows(const fs::path& path) {
  const std::string text = read_text_file(path);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) - 1;  // minus header
}

const std::string kLayouts = iad::testing::layouts_dir().string();

}  // namespace

TEST(Cli, UsageErrorsExitNonZero) {
  EXPECT_EQ(iad_cli({}).code, 2);
  EXPECT_EQ(iad_cli({"dance"}).code, 2);
  EXPECT_EQ(iad_cli({"--help"}).code, 0);
  EXPECT_EQ(iad_cli({"eval", "--layout", "cramped_room_mini"}).code, 2);  // no --agent
}

TEST(Cli, MissingLayoutFailsBeforeTraining) {
  const fs::path dir = fresh_dir("missing_layout");
  auto args = tiny_args(dir);
  args.insert(args.end(), {"--layout", "no_such_layout.layout", "--out", (dir / "run").string()});
  args.insert(args.begin(), "train-iad");
  const CliRun r = iad_cli(args);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("no_such_layout"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir / "run"));
}

TEST(Cli, BadConfigNamesTheLine) {
  const fs::path dir = fresh_dir("bad_config");
  write_file_atomic(dir / "bad.kv", "layout = cramped_room_mini\nepochs = many\n");
  const CliRun r = iad_cli({"train-iad", "--config", (dir / "bad.kv").string(), "--out", (dir / "run").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("bad.kv:2"), std::string::npos) << r.err;
  EXPECT_EQ(iad_cli({"train-iad", "--set", "nonsense", "--out", (dir / "run").string()}).code, 2);
  EXPECT_EQ(iad_cli({"train-iad", "--partners", (dir / "none.json").string(), "--layouts-dir", kLayouts, "--out",
                     (dir / "run").string()})
                .code,
            2);
}

TEST(Cli, TrainIadWritesOutputsAndResumesWithoutGaps) {
  const fs::path dir = fresh_dir("train");
  const fs::path run = dir / "run";
  auto args = tiny_args(dir);
  args.insert(args.begin(), "train-iad");
  args.insert(args.end(), {"--skills", "3", "--seed", "5", "--out", run.string(), "--quiet"});
  CliRun r = iad_cli(args);
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"config.kv", "metrics.jsonl", "policy.ckpt", "state.ckpt"}) {
    EXPECT_TRUE(fs::exists(run / f)) << f;
  }
  EXPECT_EQ(read_jsonl(run / "metrics.jsonl").size(), 4u);  // 400 steps / (2 envs x 50)
  EXPECT_NE(read_text_file(run / "config.kv").find("num_skills = 3"), std::string::npos);

  // A rerun refuses to overwrite unless forced.
  EXPECT_EQ(iad_cli(args).code, 2);

  r = iad_cli({"train-iad", "--out", run.string(), "--resume", "--steps", "800", "--quiet"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = read_jsonl(run / "metrics.jsonl");
  ASSERT_EQ(rows.size(), 8u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i]["update"], static_cast<int>(i) + 1);
    EXPECT_EQ(rows[i]["steps"], 100 * static_cast<int>(i + 1));
  }
  EXPECT_EQ(iad_cli({"train-iad", "--out", (dir / "nothing").string(), "--resume"}).code, 2);
}

TEST(Cli, EvalSelfPlayMatchesPairwiseDiagonal) {
  const fs::path dir = fresh_dir("eval");
  const fs::path agent = save_agent(dir / "agent.ckpt", 1);
  population::PartnerPopulation pop;
  pop.tag = "one";
  population::PartnerRecord rec;
  rec.id = "agent";
  rec.checkpoint = agent;
  rec.layout = "cramped_room_mini";
  rec.digest = grad::file_checksum(agent);
  pop.records.push_back(rec);
  population::save_manifest(dir / "pop.json", pop);

  CliRun r = iad_cli({"eval", "--agent", agent.string(), "--layout", "cramped_room_mini", "--layouts-dir", kLayouts,
                      "--episodes", "3", "--seed", "9", "--out", (dir / "eval").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const json report = json::parse(read_text_file(dir / "eval" / "eval.json"));
  const double self_mean = report["groups"][0]["mean"];

  env::LayoutSpec layout = iad::testing::shipped_layout("cramped_room_mini");
  const auto m = population::pairwise_matrix(population::load_manifest(dir / "pop.json"), layout, 3, 9);
  EXPECT_EQ(self_mean, m.mean[0][0]);
  EXPECT_TRUE(fs::exists(dir / "eval" / "eval.csv"));

  // Deterministic for a seed.
  r = iad_cli({"eval", "--agent", agent.string(), "--layout", "cramped_room_mini", "--layouts-dir", kLayouts,
               "--episodes", "3", "--seed", "9", "--out", (dir / "eval").string(), "--force"});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(json::parse(read_text_file(dir / "eval" / "eval.json")), report);

  EXPECT_EQ(iad_cli({"eval", "--agent", agent.string(), "--layout", "cramped_room_mini", "--layouts-dir", kLayouts,
                     "--episodes", "0"})
                .code,
            2);
  r = iad_cli({"eval", "--agent", agent.string(), "--layout", "coordination_ring_mini", "--layouts-dir", kLayouts});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("does not fit layout coordination_ring_mini"), std::string::npos) << r.err;
  EXPECT_EQ(iad_cli({"eval", "--agent", agent.string(), "--population", (dir / "pop.json").string(), "--layout",
                     "cramped_room_mini", "--layouts-dir", kLayouts, "--episodes", "1"})
                .code,
            0);
}

TEST(Cli, AnalyzeSkills) {
  const fs::path dir = fresh_dir("analyze");
  const fs::path iad_agent = save_agent(dir / "iad.ckpt", 4);
  const fs::path flat_agent = save_agent(dir / "flat.ckpt", 1);
  const std::vector<std::string> base = {"analyze-skills", "--layout", "cramped_room_mini", "--layouts-dir",
                                         kLayouts, "--horizon", "40", "--episodes", "4", "--seed", "2"};
  auto with = [&](std::vector<std::string> extra) {
    std::vector<std::string> a = base;
    a.insert(a.end(), extra.begin(), extra.end());
    return a;
  };

  CliRun r = iad_cli(with({"--agent", flat_agent.string(), "--out", (dir / "flat").string()}));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("|Z| = 1"), std::string::npos) << r.err;

  r = iad_cli(with({"--agent", iad_agent.string(), "--out", (dir / "never").string(), "--termination", "never"}));
  ASSERT_EQ(r.code, 0) << r.err;
  json report = json::parse(read_text_file(dir / "never" / "skills.json"));
  for (const json& ep : report["episodes"]) EXPECT_EQ(ep["segments"], 1);
  EXPECT_EQ(csv_rows(dir / "never" / "segments.csv"), 4u);

  r = iad_cli(with({"--agent", iad_agent.string(), "--out", (dir / "learned").string(), "--partner", "heuristic"}));
  ASSERT_EQ(r.code, 0) << r.err;
  report = json::parse(read_text_file(dir / "learned" / "skills.json"));
  std::int64_t sum = 0;
  for (std::int64_t c : report["totals"].get<std::vector<std::int64_t>>()) sum += c;
  EXPECT_EQ(sum, 4 * 40);
  EXPECT_EQ(report["timesteps"], 4 * 40);
  const std::size_t segments = report["segment_count"];
  EXPECT_GT(segments, 4u);
  EXPECT_EQ(csv_rows(dir / "learned" / "segment_embeddings.csv"), segments);
  EXPECT_EQ(csv_rows(dir / "learned" / "skill_usage.csv"), 4u);
  const std::string header = read_text_file(dir / "learned" / "segment_embeddings.csv").substr(0, 80);
  EXPECT_EQ(header.rfind("episode,start,length,skill,h_0,", 0), 0u) << header;

  // Same seed, same analysis.
  r = iad_cli(with({"--agent", iad_agent.string(), "--out", (dir / "learned").string(), "--partner", "heuristic",
                    "--force"}));
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(json::parse(read_text_file(dir / "learned" / "skills.json")), report);
}

TEST(Cli, AnalyzeRecordedSession) {
  const fs::path dir = fresh_dir("analyze_session");
  const auto agent_ptr = std::make_shared<policy::HierarchicalPolicy>(
      policy::load_policy(save_agent(dir / "iad.ckpt", 3)));
  env::LayoutSpec layout = iad::testing::shipped_layout("cramped_room_mini");
  layout.horizon = 30;
  // Log a session by playing the agent in green against scripted blue moves.
  core::PolicyActor actor(agent_ptr, 4);
  env::GameState state = env::reset(layout);
  std::vector<env::TrajectoryRecord> records;
  const auto script = iad::testing::cramped_room_solo_delivery();
  for (std::size_t t = 0; !state.done; ++t) {
    const std::array<env::Action, 2> actions = {script[t % script.size()], actor.act(layout, state, env::kGreen)};
    env::StepResult res = env::step(layout, state, actions[0], actions[1]);
    records.push_back(env::make_record(layout, state, actions, res, env::kBlue, actor.active_skill(),
                                       actor.skill_is_new()));
    state = res.next;
  }
  env::write_trajectory(dir / "session.jsonl", records);
  const CliRun r = iad_cli({"analyze-skills", "--agent", (dir / "iad.ckpt").string(), "--session",
                            (dir / "session.jsonl").string(), "--layout", "cramped_room_mini", "--layouts-dir",
                            kLayouts, "--horizon", "30", "--out", (dir / "out").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const json report = json::parse(read_text_file(dir / "out" / "skills.json"));
  std::vector<std::int64_t> expected(3, 0);
  for (const auto& rec : records) ++expected[static_cast<std::size_t>(*rec.agent_skill)];
  EXPECT_EQ(report["totals"].get<std::vector<std::int64_t>>(), expected);
  EXPECT_EQ(report["episodes"][0]["agent_seat"], "green");
}

TEST(Cli, ReplayGoldenTranscript) {
  const fs::path data = iad::testing::source_dir() / "tests/data/replay_10_steps.jsonl";
  const fs::path golden = iad::testing::source_dir() / "tests/golden/replay_10_steps.txt";
  if (std::getenv("IAD_UPDATE_GOLDEN") != nullptr) {
    env::LayoutSpec layout = iad::testing::shipped_layout("cramped_room_mini");
    layout.horizon = 10;
    const auto script = iad::testing::cramped_room_solo_delivery();
    const int skills[10] = {2, 2, 2, 0, 0, 0, 0, 3, 3, 3};
    env::GameState state = env::reset(layout);
    std::vector<env::TrajectoryRecord> records;
    for (int t = 0; t < 10; ++t) {
      const std::array<env::Action, 2> actions = {script[static_cast<std::size_t>(t)], env::Action::kStay};
      env::StepResult res = env::step(layout, state, actions[0], actions[1]);
      records.push_back(env::make_record(layout, state, actions, res, env::kBlue, skills[t],
                                         t == 0 || skills[t] != skills[t - 1]));
      state = res.next;
    }
    env::write_trajectory(data, records);
    write_file_atomic(golden, cli::replay_transcript(data.string(), "", kLayouts));
  }
  const CliRun r = iad_cli({"replay", data.string(), "--layouts-dir", kLayouts});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, read_text_file(golden));

  // Totals and skill annotations agree with the log itself.
  const auto records = env::read_trajectory(data);
  ASSERT_EQ(records.size(), 10u);
  double ext = 0.0, shaped = 0.0;
  for (const auto& rec : records) {
    ext += rec.reward_extrinsic;
    shaped += rec.reward_shaped;
  }
  char totals[96];
  std::snprintf(totals, sizeof totals, "totals  extrinsic %.1f  shaped %.1f  episodes 1\n", ext, shaped);
  EXPECT_NE(r.out.find(totals), std::string::npos) << r.out;
  const std::regex step_line(R"(-- step (\d+) .* skill (\d+)( \(new\))?)");
  int seen = 0;
  std::istringstream lines(r.out);
  std::string line;
  while (std::getline(lines, line)) {
    std::smatch m;
    if (!std::regex_search(line, m, step_line)) continue;
    const auto& rec = records.at(std::stoul(m[1]));
    EXPECT_EQ(std::stoi(m[2]), *rec.agent_skill);
    EXPECT_EQ(m[3].matched, rec.skill_new);
    ++seen;
  }
  EXPECT_EQ(seen, 10);

  const fs::path dir = fresh_dir("replay");
  ASSERT_EQ(iad_cli({"replay", data.string(), "--layouts-dir", kLayouts, "--out", (dir / "t.txt").string()}).code, 0);
  EXPECT_EQ(read_text_file(dir / "t.txt"), r.out);
}

TEST(Cli, ReplayRejectsMalformedLogs) {
  const fs::path dir = fresh_dir("replay_bad");
  const fs::path data = iad::testing::source_dir() / "tests/data/replay_10_steps.jsonl";
  std::string text = read_text_file(data);
  const auto third = text.find('\n', text.find('\n') + 1);
  text.insert(third + 1, "{not json\n");
  write_file_atomic(dir / "bad.jsonl", text);
  CliRun r = iad_cli({"replay", (dir / "bad.jsonl").string(), "--layouts-dir", kLayouts});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("bad.jsonl:3"), std::string::npos) << r.err;
  EXPECT_EQ(iad_cli({"replay", (dir / "missing.jsonl").string()}).code, 2);
}

TEST(Cli, TrainBcAndPairwise) {
  const fs::path dir = fresh_dir("bc");
  env::LayoutSpec layout = iad::testing::shipped_layout("cramped_room_mini");
  env::write_trajectory(dir / "a.jsonl", iad::testing::heuristic_session(layout, 2, 1));
  CliRun r = iad_cli({"train-bc", (dir / "a.jsonl").string(), "--layouts-dir", kLayouts, "--epochs", "3", "--out",
                      (dir / "bc").string(), "--add-to", (dir / "pop.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "bc" / "a.ckpt"));
  const json report = json::parse(read_text_file(dir / "bc" / "bc_report.json"));
  EXPECT_EQ(report["epoch_loss"].size(), 3u);
  const auto pop = population::load_manifest(dir / "pop.json");
  ASSERT_EQ(pop.size(), 1u);
  EXPECT_EQ(pop.records[0].id, "bc_a");

  r = iad_cli({"pairwise", "--population", (dir / "pop.json").string(), "--layout", "cramped_room_mini",
               "--layouts-dir", kLayouts, "--horizon", "50", "--episodes", "2", "--out", (dir / "pw").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(csv_rows(dir / "pw" / "pairwise.csv"), 1u);
  EXPECT_TRUE(fs::exists(dir / "pw" / "pairwise.svg"));
  EXPECT_EQ(iad_cli({"pairwise", "--population", (dir / "pop.json").string(), "--layout", "cramped_room_mini",
                     "--layouts-dir", kLayouts, "--out", (dir / "pw").string()})
                .code,
            2);  // exists, no --force

  EXPECT_EQ(iad_cli({"train-bc", (dir / "missing.jsonl").string(), "--out", (dir / "bc2").string()}).code, 2);
}

TEST(Cli, BaselineIsDeterministic) {
  const std::vector<std::string> args = {"baseline", "--layout", "cramped_room_mini", "--layouts-dir", kLayouts,
                                         "--episodes", "5", "--seed", "3"};
  const CliRun a = iad_cli(args), b = iad_cli(args);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_NE(a.out.find("random baseline on cramped_room_mini (T = 100)"), std::string::npos);
}
