#include "iad/population/bc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "iad/common/error.hpp"
#include "iad/common/io.hpp"
#include "iad/env/observation.hpp"
#include "iad/grad/adam.hpp"
#include "iad/grad/categorical.hpp"
#include "iad/grad/ops.hpp"

namespace iad::population {

namespace g = iad::grad;

void BcConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
  if (chunk < 1) throw ConfigError("chunk must be >= 1");
  if (chunks_per_batch < 1) throw ConfigError("chunks_per_batch must be >= 1");
  if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) {
    throw ConfigError("holdout_fraction must be in [0, 1)");
  }
  if (horizon < 0) throw ConfigError("horizon must be >= 0");
}

std::vector<Demonstration> demonstrations_from_records(const env::LayoutSpec& layout,
                                                       const std::vector<env::TrajectoryRecord>& records,
                                                       const std::string& source) {
  const env::ReplayResult replay = env::replay_trajectory(layout, records, source);
  std::vector<Demonstration> demos;
  std::size_t begin = 0;
  while (begin < records.size()) {
    std::size_t end = begin;
    while (end < records.size() && !records[end].done) ++end;
    end = std::min(end + 1, records.size());
    const std::optional<int> human = records[begin].human;
    std::vector<int> seats;
    if (human) {
      seats.push_back(*human);
    } else {
      seats = {0, 1};
    }
    for (int seat : seats) {
      Demonstration d;
      d.seat = seat;
      for (std::size_t i = begin; i < end; ++i) {
        const std::vector<double> obs = env::encode_observation(layout, replay.steps[i].state, seat);
        d.observations.insert(d.observations.end(), obs.begin(), obs.end());
        d.actions.push_back(static_cast<std::size_t>(
            env::action_index(records[i].actions[static_cast<std::size_t>(seat)])));
      }
      demos.push_back(std::move(d));
    }
    begin = end;
  }
  return demos;
}

namespace {

struct Chunk {
  std::size_t demo = 0;
  std::size_t start = 0;
  std::size_t length = 0;
  policy::RecurrentState initial;
};

// Recurrent state at every chunk start under the current parameters.
void refresh_initial_states(const policy::HierarchicalPolicy& pol,
                            const std::vector<Demonstration>& demos, std::vector<Chunk>& chunks) {
  g::NoGradGuard no_grad;
  const std::size_t obs_size = pol.config().obs_size();
  std::vector<policy::RecurrentState> carry(demos.size());
  std::vector<std::size_t> order(chunks.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::tie(chunks[a].demo, chunks[a].start) < std::tie(chunks[b].demo, chunks[b].start);
  });
  for (std::size_t idx : order) {
    Chunk& c = chunks[idx];
    if (c.start == 0) carry[c.demo] = pol.initial_state(1);
    c.initial = carry[c.demo];
    const auto obs = std::span<const double>(demos[c.demo].observations)
                         .subspan(c.start * obs_size, c.length * obs_size);
    carry[c.demo] = pol.forward_sequence(obs, c.length, 1, c.initial).final_state;
  }
}

// Cross-entropy terms and argmax hits for one chunk.
struct ChunkEval {
  g::Tensor log_probs;  // (length)
  std::size_t correct = 0;
};

ChunkEval evaluate_chunk(const policy::HierarchicalPolicy& pol, const Demonstration& demo,
                         const Chunk& c) {
  const std::size_t obs_size = pol.config().obs_size();
  const auto obs = std::span<const double>(demo.observations).subspan(c.start * obs_size, c.length * obs_size);
  const policy::PolicyOutputs out = pol.forward_sequence(obs, c.length, 1, c.initial);
  const std::vector<std::size_t> skills(c.length, 0);
  const g::Tensor logits = pol.action_logits(out, skills);
  const std::span<const std::size_t> actions(demo.actions.data() + c.start, c.length);
  ChunkEval e;
  e.log_probs = g::gather_cols(g::log_softmax(logits), actions);
  const std::size_t a = pol.num_actions();
  for (std::size_t t = 0; t < c.length; ++t) {
    const g::Categorical dist(logits.data().subspan(t * a, a));
    e.correct += dist.argmax() == actions[t];
  }
  return e;
}

double accuracy(const policy::HierarchicalPolicy& pol, const std::vector<Demonstration>& demos,
                const std::vector<Chunk>& chunks, std::size_t from, std::size_t to) {
  g::NoGradGuard no_grad;
  std::size_t correct = 0, total = 0;
  for (std::size_t i = from; i < to; ++i) {
    correct += evaluate_chunk(pol, demos[chunks[i].demo], chunks[i]).correct;
    total += chunks[i].length;
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace

BcResult fit_bc(const env::LayoutSpec& layout, const std::vector<Demonstration>& demos,
                const BcConfig& config) {
  config.validate();
  policy::PolicyConfig pc;
  pc.num_skills = 1;
  pc.obs_channels = env::kObservationChannels;
  pc.height = layout.height;
  pc.width = layout.width;
  pc.conv_channels = config.conv_channels;
  pc.dense = config.dense;
  pc.recurrent = config.recurrent;
  pc.cell = config.cell;
  BcResult result{policy::HierarchicalPolicy(pc, derive_seed(config.seed, 1)), {}, {}, 0.0, 0, 0};
  policy::HierarchicalPolicy& pol = result.policy;

  std::vector<Chunk> chunks;
  for (std::size_t d = 0; d < demos.size(); ++d) {
    if (demos[d].observations.size() != demos[d].steps() * pc.obs_size()) {
      throw ContractViolation("demonstration observations do not match the layout");
    }
    for (std::size_t s = 0; s < demos[d].steps(); s += static_cast<std::size_t>(config.chunk)) {
      chunks.push_back({d, s, std::min<std::size_t>(config.chunk, demos[d].steps() - s), {}});
    }
  }
  if (chunks.empty()) throw ConfigError("no demonstration steps to learn from");

  Rng split_rng(derive_seed(config.seed, 2));
  for (std::size_t i = chunks.size(); i > 1; --i) {
    std::swap(chunks[i - 1], chunks[uniform_index(split_rng, i)]);
  }
  std::size_t heldout = static_cast<std::size_t>(
      std::ceil(config.holdout_fraction * static_cast<double>(chunks.size())));
  if (config.holdout_fraction > 0.0 && chunks.size() >= 2) heldout = std::max<std::size_t>(heldout, 1);
  heldout = std::min(heldout, chunks.size() - 1);
  const std::size_t n_train = chunks.size() - heldout;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    (i < n_train ? result.train_steps : result.heldout_steps) += chunks[i].length;
  }

  g::AdamState adam = g::AdamState::for_parameters(pol.parameters());
  Rng shuffle_rng(derive_seed(config.seed, 3));
  std::vector<std::size_t> order(n_train);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    refresh_initial_states(pol, demos, chunks);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[uniform_index(shuffle_rng, i)]);
    }
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(config.chunks_per_batch)) {
      const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(config.chunks_per_batch));
      std::size_t steps = 0;
      for (std::size_t k = b; k < e; ++k) steps += chunks[order[k]].length;
      g::Tensor loss;
      for (std::size_t k = b; k < e; ++k) {
        const Chunk& c = chunks[order[k]];
        const ChunkEval ev = evaluate_chunk(pol, demos[c.demo], c);
        const std::vector<double> w(c.length, -1.0 / static_cast<double>(steps));
        const g::Tensor part = g::weighted_sum(ev.log_probs, w);
        loss = loss.defined() ? g::add(loss, part) : part;
      }
      if (!std::isfinite(loss.item())) throw NumericError("non-finite behavior cloning loss");
      loss_sum += loss.item() * static_cast<double>(steps);
      pol.parameters().zero_grad();
      pol.parameters().accumulate_gradients(loss);
      pol.parameters().clip_grad_norm(10.0);
      g::adam_step(pol.parameters(), adam, config.lr);
    }
    pol.parameters().zero_grad();
    result.epoch_loss.push_back(loss_sum / static_cast<double>(result.train_steps));
    refresh_initial_states(pol, demos, chunks);
    result.heldout_accuracy.push_back(heldout > 0 ? accuracy(pol, demos, chunks, n_train, chunks.size())
                                                  : 0.0);
  }
  result.train_accuracy = accuracy(pol, demos, chunks, 0, n_train);
  return result;
}

BcRun train_bc(const std::vector<std::filesystem::path>& trajectory_files, const BcConfig& config,
               const std::filesystem::path& checkpoint, bool force) {
  config.validate();
  if (trajectory_files.empty()) throw ConfigError("train_bc needs at least one trajectory file");
  ensure_writable(checkpoint, force);
  std::string layout_name;
  std::vector<std::vector<env::TrajectoryRecord>> logs;
  for (const auto& path : trajectory_files) {
    logs.push_back(env::read_trajectory(path));
    const std::string& name = logs.back().front().layout;
    if (layout_name.empty()) layout_name = name;
    if (name != layout_name) {
      throw IngestionError(path.string(), 1,
                           "layout " + name + " differs from " + layout_name + " in the other files");
    }
  }
  env::LayoutSpec layout = env::resolve_layout(layout_name, config.layouts_dir);
  if (config.horizon > 0) layout.horizon = config.horizon;

  std::vector<Demonstration> demos;
  for (std::size_t i = 0; i < logs.size(); ++i) {
    auto d = demonstrations_from_records(layout, logs[i], trajectory_files[i].string());
    std::move(d.begin(), d.end(), std::back_inserter(demos));
  }

  BcRun run{fit_bc(layout, demos, config), {}};
  run.record.id = "bc_" + checkpoint.stem().string();
  run.record.checkpoint = std::filesystem::absolute(checkpoint);
  run.record.stage = Stage::kFinal;
  run.record.seed = config.seed;
  run.record.layout = layout.name;
  run.record.summary.steps = static_cast<std::int64_t>(run.result.train_steps);
  run.record.digest = policy::save_policy(
      checkpoint, run.result.policy,
      {{"kind_detail", "behavior_cloning"},
       {"layout", layout.name},
       {"epoch_loss", run.result.epoch_loss},
       {"heldout_accuracy", run.result.heldout_accuracy.empty() ? 0.0 : run.result.heldout_accuracy.back()},
       {"train_accuracy", run.result.train_accuracy},
       {"train_steps", run.result.train_steps},
       {"heldout_steps", run.result.heldout_steps}});
  return run;
}

}  // namespace iad::population
