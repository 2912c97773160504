#pragma once

#include <cstdint>
#include <string>

namespace iad::core {

// Linear interpolation from `start` (step 0) to `end` (step == total),
// clamped outside. Both endpoints are returned exactly.
struct LinearSchedule {
  double start = 0.0;
  double end = 0.0;

  double at(std::int64_t step, std::int64_t total) const;
};

inline constexpr LinearSchedule kTauSchedule{1.0, 0.05};
inline constexpr LinearSchedule kEntropySchedule{0.01, 0.0};

struct LearningRate {
  double initial = 1e-3;
  double decay_ratio = 1.0;

  // Decays linearly from `initial` to `initial / decay_ratio`.
  LinearSchedule schedule() const { return {initial, initial / decay_ratio}; }
};

// Per-layout rates. Desk-scale variants ("<name>_mini") share their parent's
// entry. Throws ConfigError for an unknown layout.
LearningRate layout_learning_rate(const std::string& layout_name);
bool has_layout_learning_rate(const std::string& layout_name);

}  // namespace iad::core
