#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "iad/env/layout.hpp"
#include "iad/env/trajectory.hpp"
#include "iad/grad/layers.hpp"
#include "iad/policy/hierarchical_policy.hpp"
#include "iad/population/population.hpp"

namespace iad::population {

struct BcConfig {
  std::string layouts_dir = "layouts";
  int horizon = 0;  // 0 = the layout file's horizon; must match the recording
  int epochs = 20;
  double lr = 1e-3;
  int chunk = 32;         // truncated BPTT length
  int chunks_per_batch = 4;
  double holdout_fraction = 0.2;
  std::uint64_t seed = 0;
  std::vector<int> conv_channels = {8, 8, 8};
  std::vector<int> dense = {32, 32};
  int recurrent = 32;
  grad::CellKind cell = grad::CellKind::kLstm;

  void validate() const;
};

// One demonstrator's view of one episode.
struct Demonstration {
  int seat = 0;
  std::vector<double> observations;  // steps x obs_size
  std::vector<std::size_t> actions;
  std::size_t steps() const { return actions.size(); }
};

// Replays the records and extracts (observation, action) streams for the
// human seat, or for both seats when a record names no human. Throws
// IngestionError when the log disagrees with the simulator.
std::vector<Demonstration> demonstrations_from_records(const env::LayoutSpec& layout,
                                                       const std::vector<env::TrajectoryRecord>& records,
                                                       const std::string& source);

struct BcResult {
  policy::HierarchicalPolicy policy;
  std::vector<double> epoch_loss;        // mean cross-entropy per training step
  std::vector<double> heldout_accuracy;  // after each epoch
  double train_accuracy = 0.0;           // after the last epoch
  std::size_t train_steps = 0;
  std::size_t heldout_steps = 0;
};

// Supervised fit of a single-skill policy on the given demonstrations.
BcResult fit_bc(const env::LayoutSpec& layout, const std::vector<Demonstration>& demos,
                const BcConfig& config);

// Reads the trajectory files (all for the same layout), fits a policy and
// saves it to `checkpoint`. The returned record describes that checkpoint.
struct BcRun {
  BcResult result;
  PartnerRecord record;
};
BcRun train_bc(const std::vector<std::filesystem::path>& trajectory_files, const BcConfig& config,
               const std::filesystem::path& checkpoint, bool force = false);

}  // namespace iad::population
