#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "iad/core/episode.hpp"
#include "iad/env/trajectory.hpp"

namespace iad::core {

// A contiguous run of steps during which one selected skill stayed active.
// A fresh selection starts a new segment even when it picks the same skill.
struct SkillSegmentSummary {
  int episode = 0;
  int start = 0;  // timestep of the first step
  int length = 0;
  int skill = 0;
  // Mean over the segment of [recurrent encoding (R), action one-hot (A)].
  std::vector<double> embedding;
};

struct EpisodeSkillUsage {
  int agent_seat = 0;
  std::vector<std::int64_t> counts;  // timesteps per skill
  int segments = 0;
  int switches = 0;  // segment boundaries where the skill id changed
  double task_return = 0.0;
};

struct SkillReport {
  std::string layout;
  int num_skills = 0;
  int num_actions = 0;
  int encoding_size = 0;
  std::vector<EpisodeSkillUsage> episodes;
  std::vector<SkillSegmentSummary> segments;

  std::vector<std::int64_t> totals() const;
  std::int64_t timesteps() const;
  std::vector<double> usage_fractions() const;
  // Skills that each take at least `fraction` of all timesteps.
  int skills_at_least(double fraction) const;
  double mean_segment_length() const;
  std::vector<double> mean_segment_length_by_skill() const;  // 0 for unused skills

  nlohmann::json to_json() const;
  // episode,agent_seat,skill_0..,segments,switches,return
  std::string usage_csv() const;
  // episode,start,length,skill
  std::string segments_csv() const;
  // episode,start,length,skill,h_0..,a_0..
  std::string embedding_csv() const;
};

// One logged or simulated episode, seen from the policy-controlled seat.
struct AgentEpisode {
  int agent_seat = 0;
  std::vector<env::Action> actions[2];
  std::vector<int> skills;  // of the agent seat
  std::vector<std::uint8_t> skill_new;
};

// Re-simulates each episode, runs the policy's recurrent encoder over the
// agent seat's observations and aggregates segments. Throws ConfigError for a
// single-skill policy or an incompatible layout.
SkillReport analyze_episodes(const policy::HierarchicalPolicy& policy, const env::LayoutSpec& layout,
                             const std::vector<AgentEpisode>& episodes);

// Plays `episodes` episodes of the policy against `partner`, the policy
// taking blue in even episodes and green in odd ones.
SkillReport analyze_skills(std::shared_ptr<const policy::HierarchicalPolicy> policy,
                           const env::LayoutSpec& layout, const ActorFactory& partner, int episodes,
                           std::uint64_t seed,
                           policy::TerminationOverride termination =
                               policy::TerminationOverride::kLearned);

// Uses the skills logged for the non-human seat of a recorded session.
// Throws IngestionError when a record lacks agent_skill.
SkillReport analyze_recorded(const policy::HierarchicalPolicy& policy, const env::LayoutSpec& layout,
                             const std::vector<env::TrajectoryRecord>& records,
                             const std::string& source = "<trajectory>");

}  // namespace iad::core
