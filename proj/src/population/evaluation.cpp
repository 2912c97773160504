#include "iad/population/evaluation.hpp"

#include <cstdio>
#include <map>
#include <sstream>

#include "iad/common/error.hpp"
#include "iad/common/io.hpp"

namespace iad::population {

namespace {

core::ReturnStats select_seat(const core::ReturnStats& s, std::size_t seat) {
  std::vector<double> returns, extrinsic;
  for (std::size_t i = seat; i < s.returns.size(); i += 2) {
    returns.push_back(s.returns[i]);
    extrinsic.push_back(s.extrinsic[i]);
  }
  return core::summarize_returns(std::move(returns), std::move(extrinsic));
}

nlohmann::json stats_json(const core::ReturnStats& s) {
  return {{"mean", s.mean},
          {"std", s.stddev},
          {"standard_error", s.standard_error},
          {"mean_extrinsic", s.mean_extrinsic},
          {"episodes", s.returns.size()}};
}

}  // namespace

EvaluationReport evaluate_against_population(const core::ActorFactory& agent,
                                             const std::string& agent_name,
                                             const PartnerPopulation& population,
                                             const env::LayoutSpec& layout, int episodes,
                                             std::uint64_t seed) {
  if (episodes < 1) throw ConfigError("episodes must be >= 1");
  const core::PartnerPool pool = load_partner_pool(population, layout);
  EvaluationReport report;
  report.agent = agent_name;
  report.layout = layout.name;
  report.episodes = episodes;

  std::vector<double> all_returns, all_ext;
  std::map<Stage, std::pair<std::vector<double>, std::vector<double>>> by_stage;
  std::map<Stage, int> stage_partners;
  for (std::size_t i = 0; i < pool.partners.size(); ++i) {
    PartnerResult r;
    r.id = pool.partners[i].id;
    r.stage = population.records[i].stage;
    r.stats = core::evaluate_pair(layout, agent, core::policy_factory(pool.partners[i].policy),
                                  episodes, derive_seed(seed, i));
    r.as_blue = select_seat(r.stats, 0);
    r.as_green = select_seat(r.stats, 1);
    auto& [stage_returns, stage_ext] = by_stage[r.stage];
    stage_returns.insert(stage_returns.end(), r.stats.returns.begin(), r.stats.returns.end());
    stage_ext.insert(stage_ext.end(), r.stats.extrinsic.begin(), r.stats.extrinsic.end());
    all_returns.insert(all_returns.end(), r.stats.returns.begin(), r.stats.returns.end());
    all_ext.insert(all_ext.end(), r.stats.extrinsic.begin(), r.stats.extrinsic.end());
    ++stage_partners[r.stage];
    report.partners.push_back(std::move(r));
  }
  report.groups.push_back({"all", static_cast<int>(pool.partners.size()),
                           core::summarize_returns(all_returns, all_ext)});
  for (auto& [stage, data] : by_stage) {
    report.groups.push_back({stage_name(stage), stage_partners[stage],
                             core::summarize_returns(data.first, data.second)});
  }
  return report;
}

nlohmann::json EvaluationReport::to_json() const {
  nlohmann::json partners_json = nlohmann::json::array();
  for (const PartnerResult& p : partners) {
    partners_json.push_back({{"id", p.id},
                             {"stage", stage_name(p.stage)},
                             {"both", stats_json(p.stats)},
                             {"blue", stats_json(p.as_blue)},
                             {"green", stats_json(p.as_green)}});
  }
  nlohmann::json groups_json = nlohmann::json::array();
  for (const GroupResult& g : groups) {
    nlohmann::json j = stats_json(g.stats);
    j["group"] = g.name;
    j["partners"] = g.partners;
    groups_json.push_back(j);
  }
  return {{"kind", "evaluation_report"},
          {"agent", agent},
          {"layout", layout},
          {"episodes_per_seat", episodes},
          {"partners", partners_json},
          {"groups", groups_json}};
}

std::string EvaluationReport::to_csv() const {
  std::ostringstream out;
  out << "row,stage,mean,std,standard_error,mean_blue,mean_green,mean_extrinsic,episodes\n";
  char buf[256];
  for (const PartnerResult& p : partners) {
    std::snprintf(buf, sizeof(buf), "%s,%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%zu\n", p.id.c_str(),
                  stage_name(p.stage), p.stats.mean, p.stats.stddev, p.stats.standard_error,
                  p.as_blue.mean, p.as_green.mean, p.stats.mean_extrinsic, p.stats.returns.size());
    out << buf;
  }
  for (const GroupResult& g : groups) {
    std::snprintf(buf, sizeof(buf), "group:%s,%s,%.6f,%.6f,%.6f,,,%.6f,%zu\n", g.name.c_str(),
                  g.name == "all" ? "" : g.name.c_str(), g.stats.mean, g.stats.stddev,
                  g.stats.standard_error, g.stats.mean_extrinsic, g.stats.returns.size());
    out << buf;
  }
  return out.str();
}

void write_report(const EvaluationReport& report, const std::filesystem::path& stem) {
  write_file_atomic(stem.string() + ".csv", report.to_csv());
  write_file_atomic(stem.string() + ".json", report.to_json().dump(2) + "\n");
}

}  // namespace iad::population
