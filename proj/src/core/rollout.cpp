#include "iad/core/rollout.hpp"

#include <array>
#include <cmath>

#include "iad/common/error.hpp"
#include "iad/core/divergence.hpp"
#include "iad/env/observation.hpp"
#include "iad/grad/tensor.hpp"

namespace iad::core {

namespace {

using policy::HierarchicalPolicy;
using policy::RecurrentState;
using policy::SkillCarry;
using policy::StepDecision;

std::vector<double> row_of(const grad::Tensor& t, std::size_t row) {
  if (!t.defined()) return {};
  const std::size_t width = t.dim(1);
  const auto data = t.data();
  return {data.begin() + static_cast<std::ptrdiff_t>(row * width),
          data.begin() + static_cast<std::ptrdiff_t>((row + 1) * width)};
}

void reserve_track(Track& track, std::size_t horizon, std::size_t obs_size) {
  track.obs.reserve(horizon * obs_size);
  for (auto* v : {&track.beta, &track.log_prob_action, &track.log_prob_skill, &track.v_lo,
                  &track.v_hi, &track.reward_extrinsic, &track.reward_shaped, &track.reward_iad,
                  &track.reward_bonus, &track.reward}) {
    v->reserve(horizon);
  }
}

// Action distribution of a policy at one row, marginalized over its skills.
std::vector<double> marginal_at(const HierarchicalPolicy& policy, const policy::PolicyOutputs& out,
                                std::size_t row) {
  std::vector<double> conditionals, skills;
  policy.all_skill_action_dists(out, row, &conditionals, &skills);
  return marginal_action_dist(skills, conditionals);
}

struct PartnerGroup {
  std::vector<int> envs;
  RecurrentState state;
  std::vector<SkillCarry> carry;
};

}  // namespace

double Track::task_return() const {
  double total = 0.0;
  for (std::size_t t = 0; t < length; ++t) total += reward_extrinsic[t] + reward_shaped[t];
  return total;
}

double Track::extrinsic_return() const {
  double total = 0.0;
  for (double r : reward_extrinsic) total += r;
  return total;
}

std::size_t RolloutBuffers::transition_count() const {
  std::size_t n = 0;
  for (const Track& t : tracks) n += t.length;
  return n;
}

std::size_t RolloutBuffers::segment_count() const {
  std::size_t n = 0;
  for (const Track& t : tracks) n += t.segments.size();
  return n;
}

RolloutRngs RolloutRngs::from_seed(std::uint64_t seed) {
  return {Rng(derive_seed(seed, 11)), Rng(derive_seed(seed, 12)), Rng(derive_seed(seed, 13)),
          Rng(derive_seed(seed, 14))};
}

std::vector<SkillSegment> build_segments(const Track& track, double gamma) {
  std::vector<SkillSegment> segments;
  for (std::size_t t = 0; t < track.length; ++t) {
    if (t == 0 || track.skill_new[t]) {
      if (!segments.empty()) segments.back().closed_by_termination = track.terminated[t] != 0;
      SkillSegment seg;
      seg.start = static_cast<int>(t);
      seg.skill = track.skill[t];
      seg.log_prob_skill = track.log_prob_skill[t];
      seg.v_hi = track.v_hi[t];
      segments.push_back(seg);
    }
    SkillSegment& seg = segments.back();
    seg.segment_return += std::pow(gamma, static_cast<double>(seg.length)) *
                          (track.reward_extrinsic[t] + track.reward_shaped[t]);
    ++seg.length;
  }
  return segments;
}

RolloutBuffers collect_rollout(const HierarchicalPolicy& learner, const PartnerPool& partners,
                               const RolloutSettings& settings, RolloutRngs& rngs,
                               std::uint64_t episode_index) {
  if (settings.layout == nullptr) throw ContractViolation("collect_rollout needs a layout");
  const env::LayoutSpec& layout = *settings.layout;
  if (!settings.self_play && partners.empty()) {
    throw ConfigError("partner population is empty; train against self_play or supply partners");
  }
  if (settings.n_envs < 1 || settings.chunk < 1) throw ContractViolation("bad rollout settings");
  const std::size_t horizon = static_cast<std::size_t>(layout.horizon);
  const std::size_t obs_size = env::observation_size(layout);
  const std::size_t n_envs = static_cast<std::size_t>(settings.n_envs);

  RolloutBuffers buffers;
  buffers.chunk = settings.chunk;
  buffers.tau = settings.tau;
  buffers.env_steps = static_cast<std::int64_t>(n_envs * horizon);

  // Learner rows: (env, seat).
  for (std::size_t e = 0; e < n_envs; ++e) {
    if (settings.self_play) {
      for (int seat = 0; seat < env::kNumPlayers; ++seat) {
        Track& t = buffers.tracks.emplace_back();
        t.env = static_cast<int>(e);
        t.seat = seat;
      }
    } else {
      Track& t = buffers.tracks.emplace_back();
      t.env = static_cast<int>(e);
      t.seat = static_cast<int>((e + episode_index) % 2);
    }
  }
  const std::size_t rows = buffers.tracks.size();
  for (Track& t : buffers.tracks) reserve_track(t, horizon, obs_size);

  std::vector<PartnerGroup> groups(partners.size());
  std::vector<int> partner_of(n_envs, -1);
  if (!settings.self_play) {
    for (std::size_t e = 0; e < n_envs; ++e) {
      partner_of[e] = static_cast<int>(uniform_index(rngs.partner_choice, partners.size()));
      groups[static_cast<std::size_t>(partner_of[e])].envs.push_back(static_cast<int>(e));
    }
    for (std::size_t p = 0; p < groups.size(); ++p) {
      PartnerGroup& g = groups[p];
      if (g.envs.empty()) continue;
      g.state = partners.partners[p].policy->initial_state(g.envs.size());
      g.carry.assign(g.envs.size(), {});
    }
    for (Track& t : buffers.tracks) t.partner = partner_of[static_cast<std::size_t>(t.env)];
  }

  const bool jsd_active = settings.jsd_weight > 0.0 && !settings.jsd_references.empty();
  std::vector<RecurrentState> ref_states;
  for (const HierarchicalPolicy* ref : settings.jsd_references) {
    ref_states.push_back(ref->initial_state(rows));
  }

  const bool intrinsic = settings.compute_intrinsic;
  RecurrentState state = learner.initial_state(rows);
  std::vector<SkillCarry> carry(rows);
  std::vector<env::GameState> games(n_envs, env::reset(layout));
  std::vector<double> obs(rows * obs_size);
  std::vector<double> partner_obs;
  std::vector<std::array<env::Action, 2>> actions(n_envs);

  for (std::size_t t = 0; t < horizon; ++t) {
    for (std::size_t r = 0; r < rows; ++r) {
      const Track& tr = buffers.tracks[r];
      env::encode_observation_into(layout, games[static_cast<std::size_t>(tr.env)], tr.seat,
                                   std::span<double>(obs).subspan(r * obs_size, obs_size));
    }
    if (t % settings.chunk == 0) {
      for (std::size_t r = 0; r < rows; ++r) {
        buffers.tracks[r].chunk_hidden.push_back(row_of(state.hidden, r));
        buffers.tracks[r].chunk_cell.push_back(row_of(state.cell, r));
      }
    }
    const std::vector<StepDecision> decisions =
        learner.act(obs, state, carry, rngs.skill, rngs.action, settings.termination,
                    intrinsic || jsd_active);
    for (std::size_t r = 0; r < rows; ++r) {
      const Track& tr = buffers.tracks[r];
      actions[static_cast<std::size_t>(tr.env)][static_cast<std::size_t>(tr.seat)] =
          env::action_from_index(decisions[r].action);
    }

    for (std::size_t p = 0; p < groups.size(); ++p) {
      PartnerGroup& g = groups[p];
      if (g.envs.empty()) continue;
      partner_obs.resize(g.envs.size() * obs_size);
      for (std::size_t i = 0; i < g.envs.size(); ++i) {
        const std::size_t e = static_cast<std::size_t>(g.envs[i]);
        const int seat = 1 - static_cast<int>((e + episode_index) % 2);
        env::encode_observation_into(layout, games[e], seat,
                                     std::span<double>(partner_obs).subspan(i * obs_size, obs_size));
      }
      const auto partner_decisions = partners.partners[p].policy->act(
          partner_obs, g.state, g.carry, rngs.partner, rngs.partner);
      for (std::size_t i = 0; i < g.envs.size(); ++i) {
        const std::size_t e = static_cast<std::size_t>(g.envs[i]);
        const std::size_t seat = 1 - (e + episode_index) % 2;
        actions[e][seat] = env::action_from_index(partner_decisions[i].action);
      }
    }

    std::vector<std::vector<double>> ref_marginals;
    if (jsd_active) {
      grad::NoGradGuard no_grad;
      for (std::size_t k = 0; k < settings.jsd_references.size(); ++k) {
        const HierarchicalPolicy& ref = *settings.jsd_references[k];
        const policy::PolicyOutputs out = ref.forward(obs, rows, ref_states[k]);
        ref_states[k] = out.final_state;
        for (std::size_t r = 0; r < rows; ++r) ref_marginals.push_back(marginal_at(ref, out, r));
      }
    }

    std::vector<env::StepResult> results;
    results.reserve(n_envs);
    for (std::size_t e = 0; e < n_envs; ++e) {
      results.push_back(env::step(layout, games[e], actions[e][0], actions[e][1]));
    }

    for (std::size_t r = 0; r < rows; ++r) {
      Track& tr = buffers.tracks[r];
      const StepDecision& d = decisions[r];
      const env::StepResult& res = results[static_cast<std::size_t>(tr.env)];
      tr.obs.insert(tr.obs.end(), obs.begin() + static_cast<std::ptrdiff_t>(r * obs_size),
                    obs.begin() + static_cast<std::ptrdiff_t>((r + 1) * obs_size));
      tr.skill.push_back(d.skill);
      tr.action.push_back(d.action);
      tr.skill_new.push_back(d.skill_is_new ? 1 : 0);
      tr.has_termination.push_back(d.has_termination ? 1 : 0);
      tr.terminated.push_back(d.terminated ? 1 : 0);
      tr.beta.push_back(d.beta);
      tr.log_prob_action.push_back(d.log_prob_action);
      tr.log_prob_skill.push_back(d.log_prob_skill);
      tr.v_lo.push_back(d.v_lo);
      tr.v_hi.push_back(d.v_hi);
      tr.reward_extrinsic.push_back(res.reward_extrinsic);
      tr.reward_shaped.push_back(res.reward_shaped);
      const double r_iad = intrinsic ? intrinsic_reward(d.skill, d.skill_probs, d.action_probs) : 0.0;
      double bonus = 0.0;
      if (jsd_active) {
        const std::vector<double> own = marginal_action_dist(d.skill_probs, d.action_probs);
        std::vector<std::span<const double>> dists = {own};
        for (std::size_t k = 0; k < settings.jsd_references.size(); ++k) {
          dists.emplace_back(ref_marginals[k * rows + r]);
        }
        bonus = settings.jsd_weight * js_divergence(dists);
      }
      tr.reward_iad.push_back(r_iad);
      tr.reward_bonus.push_back(bonus);
      tr.reward.push_back(res.reward_extrinsic + res.reward_shaped + settings.tau * r_iad + bonus);
      ++tr.length;
    }
    for (std::size_t e = 0; e < n_envs; ++e) games[e] = std::move(results[e].next);
  }

  for (Track& tr : buffers.tracks) tr.segments = build_segments(tr, settings.gamma);
  return buffers;
}

}  // namespace iad::core
