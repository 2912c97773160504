#include "iad/core/skill_analysis.hpp"

#include <cstdio>
#include <sstream>

#include "iad/common/error.hpp"
#include "iad/env/observation.hpp"

namespace iad::core {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::vector<std::int64_t> SkillReport::totals() const {
  std::vector<std::int64_t> t(static_cast<std::size_t>(num_skills), 0);
  for (const EpisodeSkillUsage& e : episodes) {
    for (std::size_t z = 0; z < t.size(); ++z) t[z] += e.counts[z];
  }
  return t;
}

std::int64_t SkillReport::timesteps() const {
  std::int64_t n = 0;
  for (std::int64_t c : totals()) n += c;
  return n;
}

std::vector<double> SkillReport::usage_fractions() const {
  const auto t = totals();
  const double n = static_cast<double>(timesteps());
  std::vector<double> f(t.size(), 0.0);
  if (n == 0) return f;
  for (std::size_t z = 0; z < t.size(); ++z) f[z] = static_cast<double>(t[z]) / n;
  return f;
}

int SkillReport::skills_at_least(double fraction) const {
  int n = 0;
  for (double f : usage_fractions()) n += f >= fraction;
  return n;
}

double SkillReport::mean_segment_length() const {
  if (segments.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& s : segments) sum += s.length;
  return sum / static_cast<double>(segments.size());
}

std::vector<double> SkillReport::mean_segment_length_by_skill() const {
  std::vector<double> sum(static_cast<std::size_t>(num_skills), 0.0), count(sum.size(), 0.0);
  for (const auto& s : segments) {
    sum[static_cast<std::size_t>(s.skill)] += s.length;
    count[static_cast<std::size_t>(s.skill)] += 1.0;
  }
  for (std::size_t z = 0; z < sum.size(); ++z) sum[z] = count[z] > 0 ? sum[z] / count[z] : 0.0;
  return sum;
}

nlohmann::json SkillReport::to_json() const {
  nlohmann::json eps = nlohmann::json::array();
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    const auto& e = episodes[i];
    eps.push_back({{"episode", i},
                   {"agent_seat", e.agent_seat == env::kBlue ? "blue" : "green"},
                   {"counts", e.counts},
                   {"segments", e.segments},
                   {"switches", e.switches},
                   {"return", e.task_return}});
  }
  return {{"kind", "skill_analysis"},
          {"layout", layout},
          {"num_skills", num_skills},
          {"episodes", eps},
          {"totals", totals()},
          {"timesteps", timesteps()},
          {"usage_fraction", usage_fractions()},
          {"segment_count", segments.size()},
          {"mean_segment_length", mean_segment_length()},
          {"mean_segment_length_by_skill", mean_segment_length_by_skill()},
          {"skills_at_least_10pct", skills_at_least(0.1)}};
}

std::string SkillReport::usage_csv() const {
  std::ostringstream out;
  out << "episode,agent_seat";
  for (int z = 0; z < num_skills; ++z) out << ",skill_" << z;
  out << ",segments,switches,return\n";
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    const auto& e = episodes[i];
    out << i << ',' << (e.agent_seat == env::kBlue ? "blue" : "green");
    for (std::int64_t c : e.counts) out << ',' << c;
    out << ',' << e.segments << ',' << e.switches << ',' << fmt(e.task_return) << '\n';
  }
  return out.str();
}

std::string SkillReport::segments_csv() const {
  std::ostringstream out;
  out << "episode,start,length,skill\n";
  for (const auto& s : segments) {
    out << s.episode << ',' << s.start << ',' << s.length << ',' << s.skill << '\n';
  }
  return out.str();
}

std::string SkillReport::embedding_csv() const {
  std::ostringstream out;
  out << "episode,start,length,skill";
  for (int i = 0; i < encoding_size; ++i) out << ",h_" << i;
  for (int i = 0; i < num_actions; ++i) out << ",a_" << i;
  out << '\n';
  for (const auto& s : segments) {
    out << s.episode << ',' << s.start << ',' << s.length << ',' << s.skill;
    for (double v : s.embedding) out << ',' << fmt(v);
    out << '\n';
  }
  return out.str();
}

SkillReport analyze_episodes(const policy::HierarchicalPolicy& policy, const env::LayoutSpec& layout,
                             const std::vector<AgentEpisode>& episodes) {
  const policy::PolicyConfig& pc = policy.config();
  if (pc.num_skills < 2) {
    throw ConfigError("the policy has a single skill (|Z| = 1); there is nothing to analyze");
  }
  policy::check_compatible(pc, env::kObservationChannels, layout.height, layout.width);

  SkillReport report;
  report.layout = layout.name;
  report.num_skills = pc.num_skills;
  report.num_actions = pc.num_actions;
  report.encoding_size = pc.recurrent;
  const std::size_t r = static_cast<std::size_t>(pc.recurrent);
  const std::size_t a = static_cast<std::size_t>(pc.num_actions);

  for (std::size_t ei = 0; ei < episodes.size(); ++ei) {
    const AgentEpisode& ep = episodes[ei];
    const std::size_t steps = ep.skills.size();
    if (ep.actions[0].size() != steps || ep.actions[1].size() != steps || ep.skill_new.size() != steps) {
      throw ContractViolation("episode " + std::to_string(ei) + " has misaligned fields");
    }
    EpisodeSkillUsage usage;
    usage.agent_seat = ep.agent_seat;
    usage.counts.assign(static_cast<std::size_t>(pc.num_skills), 0);

    env::GameState state = env::reset(layout);
    policy::RecurrentState rs = policy.initial_state(1);
    SkillSegmentSummary current;
    int prev_skill = -1;
    auto close_segment = [&] {
      if (current.length == 0) return;
      for (double& v : current.embedding) v /= current.length;
      report.segments.push_back(std::move(current));
      current = {};
    };
    for (std::size_t t = 0; t < steps; ++t) {
      const int z = ep.skills[t];
      if (z < 0 || z >= pc.num_skills) {
        throw ContractViolation("skill " + std::to_string(z) + " out of range at step " + std::to_string(t));
      }
      const std::vector<double> obs = env::encode_observation(layout, state, ep.agent_seat);
      rs = policy.forward(obs, 1, rs).final_state;

      if (t == 0 || ep.skill_new[t] || z != prev_skill) {
        close_segment();
        if (t > 0 && z != prev_skill) ++usage.switches;
        ++usage.segments;
        current.episode = static_cast<int>(ei);
        current.start = static_cast<int>(t);
        current.skill = z;
        current.embedding.assign(r + a, 0.0);
      }
      const auto h = rs.hidden.data();
      for (std::size_t i = 0; i < r; ++i) current.embedding[i] += h[i];
      current.embedding[r + static_cast<std::size_t>(env::action_index(ep.actions[ep.agent_seat][t]))] += 1.0;
      ++current.length;
      ++usage.counts[static_cast<std::size_t>(z)];
      prev_skill = z;

      env::StepResult res = env::step(layout, state, ep.actions[0][t], ep.actions[1][t]);
      usage.task_return += res.reward_extrinsic + res.reward_shaped;
      state = std::move(res.next);
    }
    close_segment();
    report.episodes.push_back(std::move(usage));
  }
  return report;
}

SkillReport analyze_skills(std::shared_ptr<const policy::HierarchicalPolicy> policy,
                           const env::LayoutSpec& layout, const ActorFactory& partner, int episodes,
                           std::uint64_t seed, policy::TerminationOverride termination) {
  if (!policy) throw ConfigError("no policy to analyze");
  if (policy->config().num_skills < 2) {
    throw ConfigError("the policy has a single skill (|Z| = 1); there is nothing to analyze");
  }
  if (episodes < 1) throw ConfigError("episodes must be >= 1");
  std::vector<AgentEpisode> eps;
  for (int e = 0; e < episodes; ++e) {
    const std::uint64_t es = derive_seed(seed, static_cast<std::uint64_t>(e));
    PolicyActor agent(policy, derive_seed(es, 1), termination);
    auto other = partner(derive_seed(es, 2));
    AgentEpisode ep;
    ep.agent_seat = e % 2;
    const EpisodeRecord rec = ep.agent_seat == env::kBlue ? play_episode(layout, agent, *other)
                                                          : play_episode(layout, *other, agent);
    ep.actions[0] = rec.actions[0];
    ep.actions[1] = rec.actions[1];
    ep.skills = rec.skills[ep.agent_seat];
    ep.skill_new = rec.skill_new[ep.agent_seat];
    eps.push_back(std::move(ep));
  }
  return analyze_episodes(*policy, layout, eps);
}

SkillReport analyze_recorded(const policy::HierarchicalPolicy& policy, const env::LayoutSpec& layout,
                             const std::vector<env::TrajectoryRecord>& records, const std::string& source) {
  std::vector<AgentEpisode> eps;
  AgentEpisode current;
  bool open = false;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const env::TrajectoryRecord& rec = records[i];
    if (!rec.agent_skill) throw IngestionError(source, i + 1, "record has no agent_skill");
    if (!open) {
      current = {};
      current.agent_seat = rec.human ? 1 - *rec.human : env::kGreen;
      open = true;
    }
    current.actions[0].push_back(rec.actions[0]);
    current.actions[1].push_back(rec.actions[1]);
    current.skills.push_back(*rec.agent_skill);
    current.skill_new.push_back(rec.skill_new ? 1 : 0);
    if (rec.done) {
      eps.push_back(std::move(current));
      open = false;
    }
  }
  if (open) eps.push_back(std::move(current));
  return analyze_episodes(policy, layout, eps);
}

}  // namespace iad::core
