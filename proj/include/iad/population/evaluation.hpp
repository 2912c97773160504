#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "iad/core/episode.hpp"
#include "iad/population/population.hpp"

namespace iad::population {

struct PartnerResult {
  std::string id;
  Stage stage = Stage::kFinal;
  core::ReturnStats stats;  // both seats
  core::ReturnStats as_blue;
  core::ReturnStats as_green;
};

struct GroupResult {
  std::string name;  // "all" or a stage name
  int partners = 0;
  core::ReturnStats stats;  // pooled over every episode of the group
};

struct EvaluationReport {
  std::string agent;
  std::string layout;
  int episodes = 0;  // per partner and seat
  std::vector<PartnerResult> partners;
  std::vector<GroupResult> groups;  // "all" first, then stages present

  nlohmann::json to_json() const;
  std::string to_csv() const;
  const GroupResult& overall() const { return groups.front(); }
};

// Plays `agent` with every partner for `episodes` episodes in each seat.
EvaluationReport evaluate_against_population(const core::ActorFactory& agent,
                                             const std::string& agent_name,
                                             const PartnerPopulation& population,
                                             const env::LayoutSpec& layout, int episodes,
                                             std::uint64_t seed);

// Writes <stem>.csv and <stem>.json.
void write_report(const EvaluationReport& report, const std::filesystem::path& stem);

}  // namespace iad::population
