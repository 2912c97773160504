#include "iad/policy/hierarchical_policy.hpp"

#include <algorithm>
#include <cmath>

#include "iad/common/error.hpp"
#include "iad/grad/categorical.hpp"
#include "iad/grad/checkpoint.hpp"
#include "iad/grad/ops.hpp"

namespace iad::policy {

using nlohmann::json;
namespace g = iad::grad;

namespace {

constexpr const char* kPolicyKind = "hierarchical_policy";

double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace

json PolicyConfig::to_json() const {
  return {{"num_skills", num_skills},
          {"num_actions", num_actions},
          {"obs_channels", obs_channels},
          {"height", height},
          {"width", width},
          {"conv_channels", conv_channels},
          {"kernel", kernel},
          {"dense", dense},
          {"recurrent", recurrent},
          {"cell", g::cell_kind_name(cell)}};
}

PolicyConfig PolicyConfig::from_json(const json& j) {
  PolicyConfig c;
  c.num_skills = j.at("num_skills").get<int>();
  c.num_actions = j.at("num_actions").get<int>();
  c.obs_channels = j.at("obs_channels").get<int>();
  c.height = j.at("height").get<int>();
  c.width = j.at("width").get<int>();
  c.conv_channels = j.at("conv_channels").get<std::vector<int>>();
  c.kernel = j.at("kernel").get<int>();
  c.dense = j.at("dense").get<std::vector<int>>();
  c.recurrent = j.at("recurrent").get<int>();
  c.cell = g::parse_cell_kind(j.at("cell").get<std::string>());
  return c;
}

HierarchicalPolicy::HierarchicalPolicy(const PolicyConfig& config, std::uint64_t seed)
    : config_(config) {
  if (config.num_skills < 1) throw ConfigError("num_skills must be >= 1");
  if (config.num_actions != 6) throw ConfigError("num_actions must be 6");
  if (config.height < 1 || config.width < 1 || config.obs_channels < 1) {
    throw ConfigError("policy needs the observation shape (channels, height, width)");
  }
  if (config.dense.empty() || config.recurrent < 1) {
    throw ConfigError("policy needs at least one dense layer and a recurrent size");
  }
  Rng rng(seed);
  std::size_t channels = static_cast<std::size_t>(config.obs_channels);
  for (std::size_t i = 0; i < config.conv_channels.size(); ++i) {
    const auto out = static_cast<std::size_t>(config.conv_channels[i]);
    convs_.emplace_back(params_, "backbone.conv" + std::to_string(i), channels, out,
                        static_cast<std::size_t>(config.kernel), rng);
    channels = out;
  }
  std::size_t width = channels * static_cast<std::size_t>(config.height * config.width);
  for (std::size_t i = 0; i < config.dense.size(); ++i) {
    const auto out = static_cast<std::size_t>(config.dense[i]);
    dense_.emplace_back(params_, "backbone.dense" + std::to_string(i), width, out, rng,
                        std::sqrt(2.0));
    width = out;
  }
  const auto r = static_cast<std::size_t>(config.recurrent);
  const auto z = num_skills();
  const auto a = num_actions();
  cell_ = g::RecurrentCell(params_, "backbone.rnn", config.cell, width, r, rng);
  skill_head_ = g::Dense(params_, "head.skill", r, z, rng, 0.01);
  value_hi_head_ = g::Dense(params_, "head.value_hi", r, 1, rng, 1.0);
  action_head_ = g::Dense(params_, "head.action", r, a, rng, 0.01);
  {
    std::vector<double> table(z * a);
    for (double& v : table) v = 0.5 * standard_normal(rng);
    skill_action_table_ =
        params_.add("head.action.skill", Tensor::from_data({z, a}, std::move(table), true));
  }
  value_lo_head_ = g::Dense(params_, "head.value_lo", r, 1, rng, 1.0);
  termination_head_ = g::Dense(params_, "head.termination", r, z, rng, 0.01);
}

HierarchicalPolicy HierarchicalPolicy::clone() const {
  HierarchicalPolicy copy(config_, 0);
  copy.params_.copy_values_from(params_);
  return copy;
}

RecurrentState HierarchicalPolicy::initial_state(std::size_t batch) const {
  const g::RecurrentTensors t = cell_.zero_state(batch);
  return {t.hidden, t.cell};
}

PolicyOutputs HierarchicalPolicy::forward_sequence(std::span<const double> obs, std::size_t steps,
                                                   std::size_t batch,
                                                   const RecurrentState& state) const {
  const std::size_t per_obs = config_.obs_size();
  const std::size_t n = steps * batch;
  if (obs.size() != n * per_obs) {
    throw ContractViolation("policy forward: got " + std::to_string(obs.size()) +
                            " observation values, expected " + std::to_string(n) + " x " +
                            std::to_string(per_obs));
  }
  if (state.batch() != batch) {
    throw ContractViolation("policy forward: recurrent state has " +
                            std::to_string(state.batch()) + " rows, batch is " +
                            std::to_string(batch));
  }
  // C x H x W observations to N x H x W x C.
  const std::size_t c = static_cast<std::size_t>(config_.obs_channels);
  const std::size_t hw = static_cast<std::size_t>(config_.height * config_.width);
  std::vector<double> nhwc(obs.size());
  for (std::size_t i = 0; i < n; ++i) {
    const double* src = obs.data() + i * per_obs;
    double* dst = nhwc.data() + i * per_obs;
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t p = 0; p < hw; ++p) dst[p * c + ch] = src[ch * hw + p];
    }
  }
  Tensor x = Tensor::from_data({n, static_cast<std::size_t>(config_.height),
                                static_cast<std::size_t>(config_.width), c},
                               std::move(nhwc));
  for (const auto& conv : convs_) x = g::relu(conv.forward(x));
  x = g::reshape(x, {n, x.numel() / n});
  for (const auto& d : dense_) x = g::relu(d.forward(x));

  g::RecurrentTensors rec{state.hidden, state.cell};
  Tensor hidden;
  if (steps == 1) {
    rec = cell_.step(x, rec);
    hidden = rec.hidden;
  } else {
    std::vector<Tensor> outputs;
    outputs.reserve(steps);
    for (std::size_t t = 0; t < steps; ++t) {
      rec = cell_.step(g::slice_rows(x, t * batch, batch), rec);
      outputs.push_back(rec.hidden);
    }
    hidden = g::concat_rows(outputs);
  }

  PolicyOutputs out;
  out.skill_logits = skill_head_.forward(hidden);
  out.v_hi = value_hi_head_.forward(hidden);
  out.action_base_logits = action_head_.forward(hidden);
  out.v_lo = value_lo_head_.forward(hidden);
  out.termination_logits = termination_head_.forward(hidden);
  out.final_state = {rec.hidden, rec.cell};
  return out;
}

Tensor HierarchicalPolicy::action_logits(const PolicyOutputs& out,
                                         std::span<const std::size_t> skills) const {
  for (std::size_t z : skills) {
    if (z >= num_skills()) {
      throw ContractViolation("skill " + std::to_string(z) + " out of range for |Z| = " +
                              std::to_string(num_skills()));
    }
  }
  return g::add(out.action_base_logits, g::gather_rows(skill_action_table_, skills));
}

Tensor HierarchicalPolicy::log_beta(const PolicyOutputs& out,
                                    std::span<const std::size_t> skills) const {
  return g::log_sigmoid(g::gather_cols(out.termination_logits, skills));
}

Tensor HierarchicalPolicy::log_one_minus_beta(const PolicyOutputs& out,
                                              std::span<const std::size_t> skills) const {
  return g::log_sigmoid(g::neg(g::gather_cols(out.termination_logits, skills)));
}

void HierarchicalPolicy::all_skill_action_dists(const PolicyOutputs& out, std::size_t row,
                                                std::vector<double>* action_probs,
                                                std::vector<double>* skill_probs) const {
  const std::size_t z_count = num_skills(), a_count = num_actions();
  const auto base = out.action_base_logits.data().subspan(row * a_count, a_count);
  const auto table = skill_action_table_.data();
  if (action_probs != nullptr) {
    action_probs->resize(z_count * a_count);
    std::vector<double> logits(a_count);
    for (std::size_t z = 0; z < z_count; ++z) {
      for (std::size_t a = 0; a < a_count; ++a) logits[a] = base[a] + table[z * a_count + a];
      const g::Categorical dist(logits);
      std::copy(dist.probabilities().begin(), dist.probabilities().end(),
                action_probs->begin() + static_cast<std::ptrdiff_t>(z * a_count));
    }
  }
  if (skill_probs != nullptr) {
    const g::Categorical dist(out.skill_logits.data().subspan(row * z_count, z_count));
    *skill_probs = dist.probabilities();
  }
}

std::vector<StepDecision> HierarchicalPolicy::act(std::span<const double> obs,
                                                  RecurrentState& state,
                                                  std::vector<SkillCarry>& carry, Rng& skill_rng,
                                                  Rng& action_rng,
                                                  TerminationOverride termination,
                                                  bool with_action_probs) const {
  const std::size_t batch = carry.size();
  g::NoGradGuard no_grad;
  const PolicyOutputs out = forward(obs, batch, state);
  state = out.final_state;

  const std::size_t z_count = num_skills(), a_count = num_actions();
  const auto skill_logits = out.skill_logits.data();
  const auto base = out.action_base_logits.data();
  const auto table = skill_action_table_.data();
  const auto term = out.termination_logits.data();
  std::vector<StepDecision> decisions(batch);
  std::vector<double> logits(a_count);
  for (std::size_t b = 0; b < batch; ++b) {
    StepDecision& d = decisions[b];
    const g::Categorical skill_dist(skill_logits.subspan(b * z_count, z_count));
    d.skill_probs = skill_dist.probabilities();
    if (carry[b].skill) {
      const int prev = *carry[b].skill;
      d.has_termination = true;
      d.beta = sigmoid(term[b * z_count + static_cast<std::size_t>(prev)]);
      switch (termination) {
        case TerminationOverride::kLearned:
          d.terminated = uniform01(skill_rng) < d.beta;
          break;
        case TerminationOverride::kNever:
          d.terminated = false;
          break;
        case TerminationOverride::kAlways:
          d.terminated = true;
          break;
      }
    }
    if (!carry[b].skill || d.terminated) {
      carry[b].skill = z_count == 1 ? 0 : static_cast<int>(skill_dist.sample(skill_rng));
      d.skill_is_new = true;
    }
    d.skill = *carry[b].skill;
    d.log_prob_skill = skill_dist.log_prob(static_cast<std::size_t>(d.skill));
    for (std::size_t a = 0; a < a_count; ++a) {
      logits[a] = base[b * a_count + a] + table[static_cast<std::size_t>(d.skill) * a_count + a];
    }
    const g::Categorical action_dist(logits);
    d.action = static_cast<int>(action_dist.sample(action_rng));
    d.log_prob_action = action_dist.log_prob(static_cast<std::size_t>(d.action));
    d.v_hi = out.v_hi.at(b);
    d.v_lo = out.v_lo.at(b);
    if (with_action_probs) all_skill_action_dists(out, b, &d.action_probs, nullptr);
  }
  return decisions;
}

void check_compatible(const PolicyConfig& config, int obs_channels, int height, int width) {
  if (config.obs_channels != obs_channels || config.height != height || config.width != width) {
    throw ConfigError("policy expects observations of shape (" +
                      std::to_string(config.obs_channels) + ", " + std::to_string(config.height) +
                      ", " + std::to_string(config.width) + ") but the layout produces (" +
                      std::to_string(obs_channels) + ", " + std::to_string(height) + ", " +
                      std::to_string(width) + ")");
  }
}

std::string save_policy(const std::filesystem::path& path, const HierarchicalPolicy& policy,
                        const json& extra_metadata) {
  g::CheckpointContents contents;
  g::append_parameters(contents, policy.parameters());
  contents.metadata = extra_metadata.is_object() ? extra_metadata : json::object();
  contents.metadata["kind"] = kPolicyKind;
  contents.metadata["policy"] = policy.config().to_json();
  return g::save_checkpoint(path, contents);
}

HierarchicalPolicy load_policy(const std::filesystem::path& path, json* metadata) {
  const g::CheckpointContents contents = g::load_checkpoint(path);
  if (contents.metadata.value("kind", std::string()) != kPolicyKind ||
      !contents.metadata.contains("policy")) {
    throw ConfigError(path.string() + " is not a policy checkpoint");
  }
  PolicyConfig config;
  try {
    config = PolicyConfig::from_json(contents.metadata["policy"]);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": bad policy manifest: " + e.what());
  }
  HierarchicalPolicy policy(config, 0);
  g::restore_parameters(policy.parameters(), contents);
  if (metadata != nullptr) *metadata = contents.metadata;
  return policy;
}

}  // namespace iad::policy
