#include "iad/core/schedules.hpp"

#include <map>

#include "iad/common/error.hpp"

namespace iad::core {

namespace {

const std::map<std::string, LearningRate>& rate_table() {
  static const std::map<std::string, LearningRate> table = {
      {"cramped_room", {1e-3, 3.0}},
      {"asymmetric_advantages", {1e-3, 3.0}},
      {"coordination_ring", {6e-4, 1.5}},
      {"forced_coordination", {8e-4, 2.0}},
      {"counter_circuit", {8e-4, 3.0}},
  };
  return table;
}

std::string base_name(const std::string& name) {
  const std::string suffix = "_mini";
  if (name.size() > suffix.size() && name.ends_with(suffix)) {
    return name.substr(0, name.size() - suffix.size());
  }
  return name;
}

}  // namespace

double LinearSchedule::at(std::int64_t step, std::int64_t total) const {
  if (total <= 0 || step >= total) return end;
  if (step <= 0) return start;
  const double f = static_cast<double>(step) / static_cast<double>(total);
  return start * (1.0 - f) + end * f;
}

bool has_layout_learning_rate(const std::string& layout_name) {
  return rate_table().count(base_name(layout_name)) > 0;
}

LearningRate layout_learning_rate(const std::string& layout_name) {
  const auto it = rate_table().find(base_name(layout_name));
  if (it == rate_table().end()) {
    throw ConfigError("no learning-rate entry for layout '" + layout_name +
                      "'; set lr and lr_decay_ratio explicitly");
  }
  return it->second;
}

}  // namespace iad::core
