#include "iad/cli/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <thread>

#include "iad/common/error.hpp"
#include "iad/common/io.hpp"
#include "iad/core/config.hpp"
#include "iad/core/episode.hpp"
#include "iad/core/skill_analysis.hpp"
#include "iad/core/trainer.hpp"
#include "iad/env/layout.hpp"
#include "iad/env/observation.hpp"
#include "iad/env/render.hpp"
#include "iad/env/trajectory.hpp"
#include "iad/grad/checkpoint.hpp"
#include "iad/play/server.hpp"
#include "iad/population/bc.hpp"
#include "iad/population/evaluation.hpp"
#include "iad/population/pairwise.hpp"
#include "iad/population/population.hpp"

namespace iad::cli {

namespace fs = std::filesystem;
using PolicyPtr = std::shared_ptr<const policy::HierarchicalPolicy>;

namespace {

// Raised for invalid inputs found while validating, before compute starts.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string default_layouts_dir() {
  if (fs::is_directory("layouts")) return "layouts";
#ifdef IAD_DEFAULT_LAYOUTS_DIR
  return IAD_DEFAULT_LAYOUTS_DIR;
#else
  return "layouts";
#endif
}

std::string fmt(double v, int digits = 3) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

env::LayoutSpec load_layout_arg(const std::string& arg, const std::string& layouts_dir, int horizon) {
  if (arg.empty()) throw UsageError("--layout is required");
  env::LayoutSpec layout;
  try {
    layout = env::resolve_layout(arg, layouts_dir);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  if (horizon < 0) throw UsageError("--horizon must be >= 0");
  if (horizon > 0) layout.horizon = horizon;
  return layout;
}

PolicyPtr load_agent(const std::string& path, const env::LayoutSpec* layout) {
  if (path.empty()) throw UsageError("--agent is required");
  if (!fs::exists(path)) throw UsageError("checkpoint not found: " + path);
  auto p = std::make_shared<policy::HierarchicalPolicy>(policy::load_policy(path));
  if (layout != nullptr) {
    try {
      policy::check_compatible(p->config(), env::kObservationChannels, layout->height, layout->width);
    } catch (const std::exception& e) {
      throw UsageError(path + " does not fit layout " + layout->name + ": " + e.what());
    }
  }
  return p;
}

void check_episodes(int episodes) {
  if (episodes < 1) throw UsageError("--episodes must be >= 1");
}

// Output files are refused when present unless --force.
fs::path prepare_out(const std::string& out, const std::vector<std::string>& files, bool force) {
  if (out.empty()) throw UsageError("--out is required");
  const fs::path dir(out);
  for (const std::string& f : files) {
    try {
      ensure_writable(dir / f, force);
    } catch (const std::exception& e) {
      throw UsageError(e.what());
    }
  }
  return dir;
}

void write_output(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  write_file_atomic(path, text);
}

// Settings shared by the training commands: config file, then flags.
struct TrainFlags {
  std::string config;
  std::string layout;
  std::string layouts_dir;
  std::uint64_t seed = 0;
  std::int64_t steps = 0;
  std::string mode;
  int skills = 0;
  std::string partners;
  std::vector<std::string> set;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
  cmd->add_option("--config", f.config, "key = value training config file");
  cmd->add_option("--layout", f.layout, "shipped layout name or .layout path");
  cmd->add_option("--layouts-dir", f.layouts_dir, "directory of shipped layouts");
  cmd->add_option("--seed", f.seed, "run seed");
  cmd->add_option("--steps", f.steps, "total environment steps");
  cmd->add_option("--set", f.set, "extra key=value config override (repeatable)");
}

bool given(const CLI::App* cmd, const std::string& name) {
  const CLI::Option* opt = const_cast<CLI::App*>(cmd)->get_option_no_throw(name);
  return opt != nullptr && opt->count() > 0;
}

core::TrainConfig build_train_config(const TrainFlags& f, const CLI::App* cmd) {
  core::TrainConfig cfg;
  try {
    if (!f.config.empty()) cfg = core::load_train_config(f.config);
    auto set = [&](const std::string& key, const std::string& value) {
      core::apply_setting(cfg, key, value);
    };
    if (given(cmd, "--layout")) set("layout", f.layout);
    if (given(cmd, "--layouts-dir")) {
      set("layouts_dir", f.layouts_dir);
    } else if (cfg.layouts_dir == "layouts") {
      cfg.layouts_dir = default_layouts_dir();
    }
    if (given(cmd, "--seed")) set("seed", std::to_string(f.seed));
    if (given(cmd, "--steps")) set("total_steps", std::to_string(f.steps));
    if (given(cmd, "--mode")) set("mode", f.mode);
    if (given(cmd, "--skills")) set("num_skills", std::to_string(f.skills));
    if (given(cmd, "--partners")) set("partners", f.partners);
    for (const std::string& kv : f.set) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
    }
    cfg.validate();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

env::LayoutSpec train_layout(const core::TrainConfig& cfg) {
  env::LayoutSpec layout = load_layout_arg(cfg.layout, cfg.layouts_dir.string(), 0);
  if (cfg.hp.horizon > 0) layout.horizon = cfg.hp.horizon;
  return layout;
}

core::PartnerPool load_partners(const core::TrainConfig& cfg, const env::LayoutSpec& layout) {
  if (cfg.self_play()) return {};
  try {
    return population::load_partner_pool(population::load_manifest(cfg.partners), layout);
  } catch (const std::exception& e) {
    throw UsageError(std::string("partners: ") + e.what());
  }
}

std::vector<PolicyPtr> load_references(const core::TrainConfig& cfg, const env::LayoutSpec& layout) {
  std::vector<PolicyPtr> refs;
  for (const std::string& path : cfg.jsd_references) refs.push_back(load_agent(path, &layout));
  return refs;
}

std::string progress_line(const core::UpdateMetrics& m) {
  std::ostringstream s;
  s << "update " << m.update << "  steps " << m.steps << "  return " << fmt(m.mean_return)
    << "  ext " << fmt(m.mean_extrinsic) << "  tau " << fmt(m.tau) << "  lr " << fmt(m.lr, 6);
  if (m.skill_counts.size() > 1) {
    s << "  skills";
    for (std::size_t z = 0; z < m.skill_counts.size(); ++z) s << (z ? "/" : " ") << m.skill_counts[z];
  }
  return s.str();
}

// ------------------------------------------------------------------ commands

int cmd_train_iad(const TrainFlags& flags, const CLI::App* cmd, const std::string& out, bool resume,
                  bool force, bool quiet, std::ostream& os) {
  if (out.empty()) throw UsageError("--out is required");
  TrainFlags effective = flags;
  if (resume && effective.config.empty()) effective.config = (fs::path(out) / "config.kv").string();
  const core::TrainConfig cfg = build_train_config(effective, cmd);
  if (resume && force) throw UsageError("--resume and --force are exclusive");
  if (resume && !fs::exists(fs::path(out) / "state.ckpt")) {
    throw UsageError("cannot resume: " + (fs::path(out) / "state.ckpt").string() + " does not exist");
  }
  if (!resume) prepare_out(out, {"config.kv", "metrics.jsonl", "policy.ckpt", "state.ckpt"}, force);
  const env::LayoutSpec layout = train_layout(cfg);
  core::PartnerPool pool = load_partners(cfg, layout);
  std::vector<PolicyPtr> refs = load_references(cfg, layout);

  core::Trainer trainer(cfg, std::move(pool), std::move(refs));
  core::TrainRunOptions options;
  options.out_dir = out;
  options.force = force;
  options.resume = resume;
  options.on_update = [&](const core::UpdateMetrics& m) {
    if (!quiet) os << progress_line(m) << std::endl;
  };
  const core::TrainRunResult result = core::run_training(trainer, options);
  os << "trained " << trainer.steps_done() << " steps in " << trainer.updates_done() << " updates"
     << (trainer.stopped_early() ? " (stopped early)" : "") << "\n";
  os << "policy: " << result.policy_path.string() << "\n";
  return 0;
}

int cmd_train_population(const TrainFlags& flags, const CLI::App* cmd, const std::string& out,
                         const std::vector<std::uint64_t>& seeds, const std::string& tag, double jsd_weight,
                         int summary_episodes, bool force, bool quiet, std::ostream& os) {
  population::PopulationConfig pc;
  pc.base = build_train_config(flags, cmd);
  if (given(cmd, "--seeds")) pc.seeds = seeds;
  pc.tag = tag;
  pc.jsd_weight = jsd_weight;
  pc.summary_episodes = summary_episodes;
  if (pc.seeds.empty()) throw UsageError("--seeds must name at least one seed");
  if (jsd_weight < 0) throw UsageError("--jsd-weight must be >= 0");
  check_episodes(summary_episodes);
  if (out.empty()) throw UsageError("--out is required");
  prepare_out(out, {"population.json"}, force);
  train_layout(pc.base);

  const auto manifest = population::train_population(pc, out, force, [&](const population::PopulationProgress& p) {
    if (!quiet && p.metrics != nullptr) os << "agent " << p.agent << "  " << progress_line(*p.metrics) << std::endl;
  });
  for (const population::PartnerRecord& r : manifest.records) {
    os << r.id << "  " << population::stage_name(r.stage) << "  steps " << r.summary.steps << "  eval "
       << fmt(r.summary.eval_mean) << " +- " << fmt(r.summary.eval_std) << "\n";
  }
  for (const std::string& flag : manifest.stage_order_flags) os << "note: " << flag << "\n";
  os << "manifest: " << (fs::path(out) / "population.json").string() << "\n";
  return 0;
}

int cmd_eval(const std::string& agent_path, const std::string& manifest_path, const std::string& layout_arg,
             const std::string& layouts_dir, int horizon, int episodes, std::uint64_t seed,
             const std::string& out, bool force, std::ostream& os) {
  check_episodes(episodes);
  const env::LayoutSpec layout = load_layout_arg(layout_arg, layouts_dir, horizon);
  const PolicyPtr agent = load_agent(agent_path, &layout);
  population::PartnerPopulation pop;
  if (manifest_path.empty()) {
    // Self-play: the agent is its own single partner.
    population::PartnerRecord self;
    self.id = "self";
    self.checkpoint = fs::absolute(agent_path);
    self.layout = layout.name;
    self.digest = grad::file_checksum(agent_path);
    pop.tag = "self";
    pop.records.push_back(self);
  } else {
    try {
      pop = population::load_manifest(manifest_path);
    } catch (const std::exception& e) {
      throw UsageError(e.what());
    }
  }
  const fs::path dir = out.empty() ? fs::path() : prepare_out(out, {"eval.csv", "eval.json"}, force);
  // Loading the pool checks every partner before the first episode.
  try {
    population::load_partner_pool(pop, layout);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }

  const population::EvaluationReport report = population::evaluate_against_population(
      core::policy_factory(agent), fs::path(agent_path).stem().string(), pop, layout, episodes, seed);
  for (const auto& p : report.partners) {
    os << p.id << "  " << fmt(p.stats.mean) << " +- " << fmt(p.stats.stddev) << "  (blue " << fmt(p.as_blue.mean)
       << ", green " << fmt(p.as_green.mean) << ")\n";
  }
  for (const auto& g : report.groups) {
    os << "group " << g.name << "  " << fmt(g.stats.mean) << " +- " << fmt(g.stats.stddev) << "\n";
  }
  if (!dir.empty()) {
    fs::create_directories(dir);
    population::write_report(report, dir / "eval");
    os << "report: " << (dir / "eval.json").string() << "\n";
  }
  return 0;
}

core::ActorFactory partner_factory(const std::string& spec, const PolicyPtr& agent, const env::LayoutSpec& layout,
                                   policy::TerminationOverride termination) {
  if (spec == "self") return core::policy_factory(agent, termination);
  if (spec == "random") return [](std::uint64_t s) { return std::make_unique<core::RandomActor>(s); };
  if (spec == "heuristic") {
    return [](std::uint64_t s) { return std::make_unique<core::HeuristicActor>(0.1, s); };
  }
  return core::policy_factory(load_agent(spec, &layout));
}

int cmd_analyze_skills(const std::string& agent_path, const std::string& partner, const std::string& session,
                       const std::string& layout_arg, const std::string& layouts_dir, int horizon, int episodes,
                       std::uint64_t seed, const std::string& termination_arg, const std::string& out, bool force,
                       std::ostream& os) {
  check_episodes(episodes);
  const env::LayoutSpec layout = load_layout_arg(layout_arg, layouts_dir, horizon);
  const PolicyPtr agent = load_agent(agent_path, &layout);
  if (agent->config().num_skills < 2) {
    throw UsageError(agent_path + " is a flat policy (|Z| = 1): it has no skills to analyze");
  }
  policy::TerminationOverride termination;
  try {
    termination = core::parse_termination_override(termination_arg);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  const fs::path dir = prepare_out(
      out, {"skills.json", "skill_usage.csv", "segments.csv", "segment_embeddings.csv"}, force);

  core::SkillReport report;
  if (!session.empty()) {
    if (!fs::exists(session)) throw UsageError("session log not found: " + session);
    const auto records = env::read_trajectory(session);
    report = core::analyze_recorded(*agent, layout, records, session);
  } else {
    const core::ActorFactory other = partner_factory(partner, agent, layout, termination);
    report = core::analyze_skills(agent, layout, other, episodes, seed, termination);
  }

  fs::create_directories(dir);
  write_output(dir / "skills.json", report.to_json().dump(2) + "\n");
  write_output(dir / "skill_usage.csv", report.usage_csv());
  write_output(dir / "segments.csv", report.segments_csv());
  write_output(dir / "segment_embeddings.csv", report.embedding_csv());

  const auto totals = report.totals();
  const auto fractions = report.usage_fractions();
  const auto lengths = report.mean_segment_length_by_skill();
  os << "skill  steps  share  mean_segment\n";
  for (std::size_t z = 0; z < totals.size(); ++z) {
    os << z << "  " << totals[z] << "  " << fmt(fractions[z]) << "  " << fmt(lengths[z], 1) << "\n";
  }
  os << "episodes " << report.episodes.size() << "  segments " << report.segments.size()
     << "  skills >= 10%: " << report.skills_at_least(0.1) << "\n";
  return 0;
}

int cmd_replay(const std::string& log, const std::string& layout_arg, const std::string& layouts_dir,
               int delay_ms, const std::string& out, bool force, std::ostream& os) {
  if (log.empty()) throw UsageError("a trajectory log is required");
  if (!fs::exists(log)) throw UsageError("trajectory log not found: " + log);
  if (!out.empty()) {
    try {
      ensure_writable(out, force);
    } catch (const std::exception& e) {
      throw UsageError(e.what());
    }
  }
  const std::string transcript = replay_transcript(log, layout_arg, layouts_dir);
  if (!out.empty()) {
    write_output(fs::absolute(out), transcript);
  }
  if (delay_ms <= 0) {
    os << transcript;
  } else {
    std::istringstream lines(transcript);
    std::string line;
    while (std::getline(lines, line)) {
      os << line << "\n";
      if (line.rfind("--", 0) == 0) {
        os.flush();
        std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
      }
    }
  }
  return 0;
}

struct ServeFlags {
  std::string agent;
  std::string static_dir;
  std::string layouts_dir;
  std::string address = "127.0.0.1";
  unsigned short port = 8080;
  int tick_ms = 150;
  int horizon = 0;
  std::string record_dir;
  std::uint64_t seed = 0;
  bool hide_skill = false;
};

int cmd_serve(const ServeFlags& f, std::ostream& os) {
  if (f.tick_ms < 1) throw UsageError("--tick-ms must be >= 1");
  if (f.horizon < 0) throw UsageError("--horizon must be >= 0");
  if (!f.static_dir.empty() && !fs::is_directory(f.static_dir)) {
    throw UsageError("static directory not found: " + f.static_dir);
  }
  play::ServerConfig cfg;
  cfg.address = f.address;
  cfg.port = f.port;
  cfg.static_dir = f.static_dir;
  cfg.layouts_dir = f.layouts_dir.empty() ? default_layouts_dir() : f.layouts_dir;
  if (!fs::is_directory(cfg.layouts_dir)) throw UsageError("layouts directory not found: " + cfg.layouts_dir.string());
  cfg.policy = load_agent(f.agent, nullptr);
  cfg.tick_ms = f.tick_ms;
  cfg.horizon = f.horizon;
  cfg.record_dir = f.record_dir;
  cfg.seed = f.seed;
  cfg.show_skill = !f.hide_skill;
  play::PlayServer server(cfg);
  os << "serving on http://" << f.address << ":" << f.port << " (websocket at /ws)" << std::endl;
  server.run();
  return 0;
}

int cmd_train_bc(const std::vector<std::string>& logs, const std::string& layouts_dir, int horizon, int epochs,
                 double lr, std::uint64_t seed, const std::string& add_to, const std::string& out, bool force,
                 std::ostream& os) {
  if (logs.empty()) throw UsageError("at least one trajectory log is required");
  for (const std::string& l : logs) {
    if (!fs::exists(l)) throw UsageError("trajectory log not found: " + l);
  }
  population::BcConfig cfg;
  cfg.layouts_dir = layouts_dir.empty() ? default_layouts_dir() : layouts_dir;
  cfg.horizon = horizon;
  cfg.epochs = epochs;
  cfg.lr = lr;
  cfg.seed = seed;
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  // The partner id is derived from the checkpoint name: bc_<first log stem>.
  const std::string ckpt_name = fs::path(logs.front()).stem().string() + ".ckpt";
  const fs::path dir = prepare_out(out, {ckpt_name, "bc_report.json"}, force);
  population::PartnerPopulation manifest;
  if (!add_to.empty() && fs::exists(add_to)) {
    try {
      manifest = population::load_manifest(add_to);
    } catch (const std::exception& e) {
      throw UsageError(e.what());
    }
  }

  std::vector<fs::path> files(logs.begin(), logs.end());
  fs::create_directories(dir);
  const population::BcRun run = population::train_bc(files, cfg, dir / ckpt_name, force);
  nlohmann::json report = {{"epoch_loss", run.result.epoch_loss},
                           {"heldout_accuracy", run.result.heldout_accuracy},
                           {"train_accuracy", run.result.train_accuracy},
                           {"train_steps", run.result.train_steps},
                           {"heldout_steps", run.result.heldout_steps},
                           {"id", run.record.id},
                           {"layout", run.record.layout}};
  write_output(dir / "bc_report.json", report.dump(2) + "\n");
  for (std::size_t e = 0; e < run.result.epoch_loss.size(); ++e) {
    os << "epoch " << e + 1 << "  loss " << fmt(run.result.epoch_loss[e], 4) << "  held-out accuracy "
       << fmt(run.result.heldout_accuracy[e]) << "\n";
  }
  if (!add_to.empty()) {
    if (manifest.tag.empty()) manifest.tag = "bc";
    population::PartnerRecord record = run.record;
    record.checkpoint = fs::absolute(record.checkpoint);
    std::erase_if(manifest.records, [&](const population::PartnerRecord& r) { return r.id == record.id; });
    manifest.records.push_back(record);
    population::save_manifest(add_to, manifest);
    os << "added " << record.id << " to " << add_to << "\n";
  }
  os << "policy: " << (dir / ckpt_name).string() << "\n";
  return 0;
}

int cmd_pairwise(const std::string& manifest_path, const std::string& layout_arg, const std::string& layouts_dir,
                 int horizon, int episodes, std::uint64_t seed, const std::string& out, bool force,
                 std::ostream& os) {
  check_episodes(episodes);
  const env::LayoutSpec layout = load_layout_arg(layout_arg, layouts_dir, horizon);
  if (manifest_path.empty()) throw UsageError("--population is required");
  population::PartnerPopulation pop;
  try {
    pop = population::load_manifest(manifest_path);
    population::load_partner_pool(pop, layout);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  const fs::path dir = prepare_out(out, {"pairwise.csv", "pairwise.json", "pairwise.svg"}, force);
  const population::ReturnMatrix m = population::pairwise_matrix(pop, layout, episodes, seed);
  fs::create_directories(dir);
  population::write_matrix(m, dir / "pairwise");
  os << population::matrix_to_csv(m);
  os << "matrix: " << (dir / "pairwise.csv").string() << "\n";
  return 0;
}

int cmd_baseline(const std::string& layout_arg, const std::string& layouts_dir, int horizon, int episodes,
                 std::uint64_t seed, std::ostream& os) {
  check_episodes(episodes);
  const env::LayoutSpec layout = load_layout_arg(layout_arg, layouts_dir, horizon);
  const core::ReturnStats s = core::random_baseline(layout, episodes, seed);
  os << "random baseline on " << layout.name << " (T = " << layout.horizon << "): " << fmt(s.mean) << " +- "
     << fmt(s.standard_error) << " (se), " << s.returns.size() << " episodes\n";
  return 0;
}

}  // namespace

std::string replay_transcript(const std::string& log_path, const std::string& layout_arg,
                              const std::string& layouts_dir) {
  const std::vector<env::TrajectoryRecord> records = env::read_trajectory(log_path);
  if (records.empty()) throw IngestionError(log_path, 1, "log is empty");
  const std::string name = layout_arg.empty() ? records.front().layout : layout_arg;
  env::LayoutSpec layout = env::resolve_layout(name, layouts_dir.empty() ? default_layouts_dir() : layouts_dir);
  for (const env::TrajectoryRecord& r : records) {
    if (r.done) {
      layout.horizon = r.t + 1;
      break;
    }
  }
  const env::ReplayResult replay = env::replay_trajectory(layout, records, log_path);

  std::ostringstream out;
  out << "log " << fs::path(log_path).filename().string() << "  layout " << layout.name << "  steps "
      << records.size() << "\n";
  double ext = 0.0, shaped = 0.0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const env::TrajectoryRecord& r = records[i];
    const env::ReplayStep& s = replay.steps[i];
    if (r.t == 0) out << env::render_ascii(layout, s.state);
    ext += r.reward_extrinsic;
    shaped += r.reward_shaped;
    out << "-- step " << r.t << "  blue " << env::action_name(r.actions[env::kBlue]) << "  green "
        << env::action_name(r.actions[env::kGreen]);
    if (r.human) out << "  human " << (*r.human == env::kBlue ? "blue" : "green");
    out << "  skill ";
    if (r.agent_skill) {
      out << *r.agent_skill << (r.skill_new ? " (new)" : "");
    } else {
      out << "-";
    }
    out << "  reward " << fmt(r.reward_extrinsic, 1) << " + " << fmt(r.reward_shaped, 1) << " shaped";
    for (const env::Event& e : r.events) {
      out << "  [" << env::event_name(e.kind);
      if (e.player >= 0) out << " " << (e.player == env::kBlue ? "blue" : "green");
      out << "]";
    }
    out << "\n" << env::render_ascii(layout, s.result.next);
    if (r.done) out << "-- episode done  extrinsic " << fmt(ext, 1) << "  shaped " << fmt(shaped, 1) << "\n";
  }
  out << "totals  extrinsic " << fmt(replay.extrinsic_total, 1) << "  shaped " << fmt(replay.shaped_total, 1)
      << "  episodes " << replay.episodes << "\n";
  return out.str();
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hierarchical RL with skill diversity for ad hoc teamwork in a cooking gridworld", "iad"};
  app.require_subcommand(1);

  std::string out_dir;
  bool force = false, resume = false, quiet = false;
  std::string layout_arg, layouts_dir, agent, population_arg;
  std::uint64_t seed = 0;
  int episodes = 10, horizon = 0;

  // train-iad
  TrainFlags train;
  auto* train_iad = app.add_subcommand("train-iad", "train one IAD or flat PPO agent");
  add_train_flags(train_iad, train);
  train_iad->add_option("--mode", train.mode, "iad or flat");
  train_iad->add_option("--skills", train.skills, "number of skills |Z|");
  train_iad->add_option("--partners", train.partners, "self_play or a population manifest");
  train_iad->add_option("--out", out_dir, "output directory")->required();
  train_iad->add_flag("--resume", resume, "continue the run saved in --out");
  train_iad->add_flag("--force", force, "overwrite existing outputs");
  train_iad->add_flag("--quiet", quiet, "no per-update progress");

  // train-population
  TrainFlags pop_flags;
  std::vector<std::uint64_t> pop_seeds;
  std::string tag = "train";
  double jsd_weight = 0.1;
  int summary_episodes = 10;
  auto* train_pop = app.add_subcommand("train-population", "train a partner population with stage checkpoints");
  add_train_flags(train_pop, pop_flags);
  train_pop->add_option("--seeds", pop_seeds, "one agent per seed")->delimiter(',');
  train_pop->add_option("--tag", tag, "population tag");
  train_pop->add_option("--jsd-weight", jsd_weight, "style diversity bonus weight");
  train_pop->add_option("--episodes", summary_episodes, "evaluation episodes per stage checkpoint");
  train_pop->add_option("--out", out_dir, "output directory")->required();
  train_pop->add_flag("--force", force, "overwrite existing outputs");
  train_pop->add_flag("--quiet", quiet, "no per-update progress");

  auto add_layout = [&](CLI::App* cmd) {
    cmd->add_option("--layout", layout_arg, "shipped layout name or .layout path")->required();
    cmd->add_option("--layouts-dir", layouts_dir, "directory of shipped layouts");
    cmd->add_option("--horizon", horizon, "episode length override (0 keeps the layout's)");
  };

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate an agent against a partner population");
  eval->add_option("--agent", agent, "agent checkpoint")->required();
  eval->add_option("--population", population_arg, "population manifest (omit for self-play)");
  add_layout(eval);
  eval->add_option("--episodes", episodes, "episodes per partner and seat");
  eval->add_option("--seed", seed, "evaluation seed");
  eval->add_option("--out", out_dir, "output directory for eval.csv and eval.json");
  eval->add_flag("--force", force, "overwrite existing outputs");

  // analyze-skills
  std::string partner = "self", session, termination = "learned";
  auto* analyze = app.add_subcommand("analyze-skills", "skill usage, segments and segment embeddings");
  analyze->add_option("--agent", agent, "IAD checkpoint")->required();
  analyze->add_option("--partner", partner, "self, random, heuristic or a checkpoint path");
  analyze->add_option("--session", session, "analyze a recorded session log instead of playing");
  add_layout(analyze);
  analyze->add_option("--episodes", episodes, "episodes to play");
  analyze->add_option("--seed", seed, "seed");
  analyze->add_option("--termination", termination, "learned, never or always");
  analyze->add_option("--out", out_dir, "output directory")->required();
  analyze->add_flag("--force", force, "overwrite existing outputs");

  // replay
  std::string log;
  int delay_ms = 0;
  auto* replay = app.add_subcommand("replay", "step through a trajectory log in the terminal");
  replay->add_option("log", log, "trajectory log (JSON lines)")->required();
  replay->add_option("--layout", layout_arg, "layout override (default: the log's layout)");
  replay->add_option("--layouts-dir", layouts_dir, "directory of shipped layouts");
  replay->add_option("--delay-ms", delay_ms, "pause between steps");
  replay->add_option("--out", out_dir, "also write the transcript to this file");
  replay->add_flag("--force", force, "overwrite an existing transcript");

  // serve
  ServeFlags serve_flags;
  auto* serve = app.add_subcommand("serve", "host human-agent play sessions over websocket");
  serve->add_option("--agent", serve_flags.agent, "agent checkpoint")->required();
  serve->add_option("--static", serve_flags.static_dir, "web UI bundle directory");
  serve->add_option("--layouts-dir", serve_flags.layouts_dir, "directory of shipped layouts");
  serve->add_option("--address", serve_flags.address, "listen address");
  serve->add_option("--port", serve_flags.port, "listen port");
  serve->add_option("--tick-ms", serve_flags.tick_ms, "milliseconds per game step");
  serve->add_option("--horizon", serve_flags.horizon, "episode length override");
  serve->add_option("--record-dir", serve_flags.record_dir, "export finished sessions here");
  serve->add_option("--seed", serve_flags.seed, "agent sampling seed");
  serve->add_flag("--hide-skill", serve_flags.hide_skill, "never reveal the agent's active skill");

  // train-bc
  std::vector<std::string> logs;
  int bc_epochs = 20;
  double bc_lr = 1e-3;
  std::string add_to;
  auto* train_bc = app.add_subcommand("train-bc", "behavior-clone a partner from recorded sessions");
  train_bc->add_option("logs", logs, "trajectory logs")->required();
  train_bc->add_option("--layouts-dir", layouts_dir, "directory of shipped layouts");
  train_bc->add_option("--horizon", horizon, "horizon of the recordings (0 keeps the layout's)");
  train_bc->add_option("--epochs", bc_epochs, "training epochs");
  train_bc->add_option("--lr", bc_lr, "learning rate");
  train_bc->add_option("--seed", seed, "seed");
  train_bc->add_option("--add-to", add_to, "add the partner to this population manifest");
  train_bc->add_option("--out", out_dir, "output directory")->required();
  train_bc->add_flag("--force", force, "overwrite existing outputs");

  // pairwise
  int pairwise_horizon = 400, pairwise_episodes = 5;
  auto* pairwise = app.add_subcommand("pairwise", "cross-play return matrix of a population");
  pairwise->add_option("--population", population_arg, "population manifest")->required();
  pairwise->add_option("--layout", layout_arg, "shipped layout name or .layout path")->required();
  pairwise->add_option("--layouts-dir", layouts_dir, "directory of shipped layouts");
  pairwise->add_option("--horizon", pairwise_horizon, "episode length");
  pairwise->add_option("--episodes", pairwise_episodes, "episodes per pair and seat");
  pairwise->add_option("--seed", seed, "seed");
  pairwise->add_option("--out", out_dir, "output directory")->required();
  pairwise->add_flag("--force", force, "overwrite existing outputs");

  // baseline
  auto* baseline = app.add_subcommand("baseline", "mean return of two uniformly random players");
  add_layout(baseline);
  baseline->add_option("--episodes", episodes, "episodes per seat");
  baseline->add_option("--seed", seed, "seed");

  std::vector<std::string> argv_storage;
  argv_storage.push_back("iad");
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (std::string& a : argv_storage) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  const std::string dir = layouts_dir.empty() ? default_layouts_dir() : layouts_dir;
  try {
    if (train_iad->parsed()) return cmd_train_iad(train, train_iad, out_dir, resume, force, quiet, out);
    if (train_pop->parsed()) {
      return cmd_train_population(pop_flags, train_pop, out_dir, pop_seeds, tag, jsd_weight, summary_episodes,
                                  force, quiet, out);
    }
    if (eval->parsed()) {
      return cmd_eval(agent, population_arg, layout_arg, dir, horizon, episodes, seed, out_dir, force, out);
    }
    if (analyze->parsed()) {
      return cmd_analyze_skills(agent, partner, session, layout_arg, dir, horizon, episodes, seed, termination,
                                out_dir, force, out);
    }
    if (replay->parsed()) return cmd_replay(log, layout_arg, dir, delay_ms, out_dir, force, out);
    if (serve->parsed()) return cmd_serve(serve_flags, out);
    if (train_bc->parsed()) {
      return cmd_train_bc(logs, dir, horizon, bc_epochs, bc_lr, seed, add_to, out_dir, force, out);
    }
    if (pairwise->parsed()) {
      return cmd_pairwise(population_arg, layout_arg, dir, pairwise_horizon, pairwise_episodes, seed, out_dir,
                          force, out);
    }
    if (baseline->parsed()) return cmd_baseline(layout_arg, dir, horizon, episodes, seed, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace iad::cli
