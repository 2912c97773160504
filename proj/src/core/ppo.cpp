#include "iad/core/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "iad/common/error.hpp"
#include "iad/core/gae.hpp"
#include "iad/grad/ops.hpp"

namespace iad::core {

namespace g = iad::grad;
using policy::HierarchicalPolicy;

namespace {

void normalize(std::vector<std::vector<double>>& values) {
  double sum = 0.0, count = 0.0;
  for (const auto& v : values) {
    for (double x : v) sum += x;
    count += static_cast<double>(v.size());
  }
  if (count < 2.0) return;
  const double mean = sum / count;
  double var = 0.0;
  for (const auto& v : values) {
    for (double x : v) var += (x - mean) * (x - mean);
  }
  const double stddev = std::sqrt(var / count);
  for (auto& v : values) {
    for (double& x : v) x = (x - mean) / (stddev + 1e-8);
  }
}

// Index of the segment covering each timestep.
std::vector<int> segment_of_rows(const Track& track) {
  std::vector<int> out(track.length, 0);
  for (std::size_t k = 0; k < track.segments.size(); ++k) {
    const SkillSegment& s = track.segments[k];
    for (int t = s.start; t < s.start + s.length; ++t) out[static_cast<std::size_t>(t)] = static_cast<int>(k);
  }
  return out;
}

g::Tensor constant(std::vector<double> values) {
  const std::size_t n = values.size();
  return g::Tensor::from_data({n}, std::move(values));
}

// Inputs of one minibatch, rows time-major (row = s * B + b).
struct Minibatch {
  std::size_t steps = 0;
  std::size_t batch = 0;
  std::vector<double> obs;
  std::vector<double> hidden, cell;
  std::vector<std::size_t> skill, action;
  std::vector<double> old_logp, adv, ret;
  // Manager rows: segment starts.
  std::vector<std::size_t> hi_rows, hi_skill;
  std::vector<double> hi_old_logp, hi_adv, hi_ret;
  // Termination draws: previous skill, recorded draw and its segment's targets.
  std::vector<std::size_t> prev_skill;
  std::vector<double> term_mask, term_draw, term_unit, term_adv;
};

Minibatch gather(const RolloutBuffers& buffers, const AdvantageSet& adv,
                 const std::vector<std::vector<int>>& seg_of_row,
                 const std::vector<std::size_t>& group, std::size_t chunk_index, bool high_level) {
  Minibatch mb;
  const Track& first = buffers.tracks[group.front()];
  const std::size_t t0 = chunk_index * buffers.chunk;
  mb.steps = std::min(buffers.chunk, first.length - t0);
  mb.batch = group.size();
  const std::size_t obs_size = first.obs.size() / first.length;
  const std::size_t n = mb.steps * mb.batch;
  mb.obs.reserve(n * obs_size);
  for (std::size_t b = 0; b < mb.batch; ++b) {
    const Track& tr = buffers.tracks[group[b]];
    const auto& h = tr.chunk_hidden[chunk_index];
    mb.hidden.insert(mb.hidden.end(), h.begin(), h.end());
    const auto& c = tr.chunk_cell[chunk_index];
    mb.cell.insert(mb.cell.end(), c.begin(), c.end());
  }
  mb.prev_skill.assign(n, 0);
  mb.term_mask.assign(n, 0.0);
  mb.term_draw.assign(n, 0.0);
  mb.term_unit.assign(n, 0.0);
  mb.term_adv.assign(n, 0.0);
  for (std::size_t s = 0; s < mb.steps; ++s) {
    const std::size_t t = t0 + s;
    for (std::size_t b = 0; b < mb.batch; ++b) {
      const std::size_t k = group[b];
      const Track& tr = buffers.tracks[k];
      const std::size_t row = s * mb.batch + b;
      mb.obs.insert(mb.obs.end(), tr.obs.begin() + static_cast<std::ptrdiff_t>(t * obs_size),
                    tr.obs.begin() + static_cast<std::ptrdiff_t>((t + 1) * obs_size));
      mb.skill.push_back(static_cast<std::size_t>(tr.skill[t]));
      mb.action.push_back(static_cast<std::size_t>(tr.action[t]));
      mb.old_logp.push_back(tr.log_prob_action[t]);
      mb.adv.push_back(adv.lo_adv[k][t]);
      mb.ret.push_back(adv.lo_ret[k][t]);
      if (!high_level) continue;
      const int seg = seg_of_row[k][t];
      if (tr.segments[static_cast<std::size_t>(seg)].start == static_cast<int>(t)) {
        mb.hi_rows.push_back(row);
        mb.hi_skill.push_back(static_cast<std::size_t>(tr.skill[t]));
        mb.hi_old_logp.push_back(tr.log_prob_skill[t]);
        mb.hi_adv.push_back(adv.hi_adv[k][static_cast<std::size_t>(seg)]);
        mb.hi_ret.push_back(adv.hi_ret[k][static_cast<std::size_t>(seg)]);
      }
      if (tr.has_termination[t]) {
        const std::size_t prev_seg = static_cast<std::size_t>(seg_of_row[k][t - 1]);
        mb.prev_skill[row] = static_cast<std::size_t>(tr.skill[t - 1]);
        mb.term_mask[row] = 1.0;
        mb.term_draw[row] = tr.terminated[t] ? 1.0 : 0.0;
        mb.term_unit[row] = adv.hi_unit[k][prev_seg];
        mb.term_adv[row] = adv.hi_adv[k][prev_seg];
      }
    }
  }
  return mb;
}

// -mean(min(rho A, clip(rho) A)) over the given log-probs.
g::Tensor surrogate_loss(const g::Tensor& logp, const std::vector<double>& old_logp,
                         const std::vector<double>& advantages, double clip, double* kl,
                         double* clip_frac) {
  const g::Tensor ratio = g::exp(g::sub(logp, constant(old_logp)));
  const g::Tensor a = constant(advantages);
  const g::Tensor unclipped = g::mul(ratio, a);
  const g::Tensor clipped = g::mul(g::clamp(ratio, 1.0 - clip, 1.0 + clip), a);
  if (kl != nullptr) {
    double k = 0.0, c = 0.0;
    for (std::size_t i = 0; i < old_logp.size(); ++i) {
      k += old_logp[i] - logp.at(i);
      c += std::abs(ratio.at(i) - 1.0) > clip ? 1.0 : 0.0;
    }
    *kl = k / static_cast<double>(old_logp.size());
    *clip_frac = c / static_cast<double>(old_logp.size());
  }
  return g::neg(g::mean(g::minimum(unclipped, clipped)));
}

g::Tensor mean_entropy(const g::Tensor& logits) {
  const g::Tensor lp = g::log_softmax(logits);
  const double rows = static_cast<double>(logits.dim(0));
  return g::scale(g::sum(g::mul(g::softmax(logits), lp)), -1.0 / rows);
}

g::Tensor value_loss(const g::Tensor& values, const std::vector<double>& targets) {
  const g::Tensor v = g::reshape(values, {targets.size()});
  return g::mean(g::square(g::sub(v, constant(targets))));
}

}  // namespace

nlohmann::json UpdateStats::to_json() const {
  nlohmann::json j = {{"policy_loss_lo", policy_loss_lo}, {"value_loss_lo", value_loss_lo},
                      {"entropy_lo", entropy_lo},         {"policy_loss_hi", policy_loss_hi},
                      {"value_loss_hi", value_loss_hi},   {"entropy_hi", entropy_hi},
                      {"termination_loss", termination_loss}, {"approx_kl", approx_kl},
                      {"clip_fraction", clip_fraction},   {"grad_norm", grad_norm},
                      {"minibatches", minibatches},       {"aborted_epochs", aborted_epochs}};
  if (!diagnostic.empty()) j["diagnostic"] = diagnostic;
  return j;
}

double clipped_surrogate(double ratio, double advantage, double clip) {
  return std::min(ratio * advantage, std::clamp(ratio, 1.0 - clip, 1.0 + clip) * advantage);
}

AdvantageSet compute_advantages(const RolloutBuffers& buffers, const HyperParams& hp,
                                bool high_level) {
  AdvantageSet out;
  for (const Track& tr : buffers.tracks) {
    std::vector<double> values(tr.v_lo);
    values.push_back(0.0);
    std::vector<std::uint8_t> dones(tr.length, 0);
    if (tr.length > 0) dones.back() = 1;
    GaeResult lo = gae_low(tr.reward, values, dones, hp.gamma, hp.gae_lambda);
    out.lo_adv.push_back(std::move(lo.advantages));
    out.lo_ret.push_back(std::move(lo.returns));
    if (!high_level) continue;
    std::vector<double> returns, hi_values;
    for (const SkillSegment& s : tr.segments) {
      returns.push_back(s.segment_return);
      hi_values.push_back(s.v_hi);
    }
    hi_values.push_back(0.0);
    std::vector<std::uint8_t> hi_dones(returns.size(), 0);
    if (!hi_dones.empty()) hi_dones.back() = 1;
    GaeResult hi = gae_high(returns, hi_values, hi_dones, hp.gamma, hp.gae_lambda);
    out.hi_adv.push_back(std::move(hi.advantages));
    out.hi_ret.push_back(std::move(hi.returns));
  }
  if (high_level) {
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& v : out.hi_adv) {
      for (double x : v) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
      }
    }
    for (const auto& v : out.hi_adv) {
      std::vector<double> unit(v.size(), 0.5);
      if (hi > lo) {
        for (std::size_t i = 0; i < v.size(); ++i) unit[i] = (v[i] - lo) / (hi - lo);
      }
      out.hi_unit.push_back(std::move(unit));
    }
  }
  if (hp.normalize_advantages) {
    normalize(out.lo_adv);
    if (high_level) normalize(out.hi_adv);
  }
  return out;
}

UpdateStats ppo_update(HierarchicalPolicy& policy, const RolloutBuffers& buffers,
                       const AdvantageSet& advantages, const UpdateSettings& settings,
                       grad::AdamState& adam, Rng& shuffle_rng) {
  UpdateStats stats;
  if (buffers.tracks.empty()) return stats;
  const HyperParams& hp = settings.hp;
  const std::size_t length = buffers.tracks.front().length;
  for (const Track& tr : buffers.tracks) {
    if (tr.length != length) throw ContractViolation("ppo_update needs equal-length tracks");
  }
  if (advantages.lo_adv.size() != buffers.tracks.size() ||
      (settings.high_level && advantages.hi_adv.size() != buffers.tracks.size())) {
    throw ContractViolation("advantages do not match the rollout buffers");
  }
  std::vector<std::vector<int>> seg_of_row;
  for (const Track& tr : buffers.tracks) seg_of_row.push_back(segment_of_rows(tr));

  const std::size_t n_tracks = buffers.tracks.size();
  const std::size_t group_size =
      hp.minibatch_envs > 0 ? std::min<std::size_t>(hp.minibatch_envs, n_tracks) : n_tracks;
  const std::size_t chunks = (length + buffers.chunk - 1) / buffers.chunk;
  const std::size_t recurrent = static_cast<std::size_t>(policy.config().recurrent);
  const bool lstm = policy.config().cell == grad::CellKind::kLstm;

  double sum_kl = 0.0, sum_clip = 0.0;
  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    std::vector<std::size_t> order(n_tracks);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    std::vector<std::pair<std::size_t, std::vector<std::size_t>>> plan;
    for (std::size_t start = 0; start < n_tracks; start += group_size) {
      std::vector<std::size_t> group(order.begin() + static_cast<std::ptrdiff_t>(start),
                                     order.begin() + static_cast<std::ptrdiff_t>(
                                                         std::min(start + group_size, n_tracks)));
      for (std::size_t c = 0; c < chunks; ++c) plan.emplace_back(c, group);
    }
    std::shuffle(plan.begin(), plan.end(), shuffle_rng);

    for (const auto& [chunk_index, group] : plan) {
      const Minibatch mb = gather(buffers, advantages, seg_of_row, group, chunk_index,
                                  settings.high_level);
      policy::RecurrentState start;
      start.hidden = g::Tensor::from_data({mb.batch, recurrent}, mb.hidden);
      if (lstm) start.cell = g::Tensor::from_data({mb.batch, recurrent}, mb.cell);
      const policy::PolicyOutputs out = policy.forward_sequence(mb.obs, mb.steps, mb.batch, start);

      double kl = 0.0, clip_frac = 0.0;
      const g::Tensor logits = policy.action_logits(out, mb.skill);
      const g::Tensor logp = g::gather_cols(g::log_softmax(logits), mb.action);
      const g::Tensor pl_lo = surrogate_loss(logp, mb.old_logp, mb.adv, hp.clip, &kl, &clip_frac);
      const g::Tensor vl_lo = value_loss(out.v_lo, mb.ret);
      const g::Tensor ent_lo = mean_entropy(logits);
      g::Tensor loss = g::add(pl_lo, g::scale(vl_lo, hp.value_coef));
      loss = g::sub(loss, g::scale(ent_lo, settings.entropy_coef));

      double pl_hi_v = 0.0, vl_hi_v = 0.0, ent_hi_v = 0.0, term_v = 0.0;
      if (settings.high_level && !mb.hi_rows.empty()) {
        const g::Tensor hi_logits = g::gather_rows(out.skill_logits, mb.hi_rows);
        const g::Tensor hi_logp = g::gather_cols(g::log_softmax(hi_logits), mb.hi_skill);
        const g::Tensor pl_hi =
            surrogate_loss(hi_logp, mb.hi_old_logp, mb.hi_adv, hp.clip, nullptr, nullptr);
        const g::Tensor vl_hi = value_loss(g::gather_rows(out.v_hi, mb.hi_rows), mb.hi_ret);
        const g::Tensor ent_hi = mean_entropy(hi_logits);
        loss = g::add(loss, pl_hi);
        loss = g::add(loss, g::scale(vl_hi, hp.value_coef));
        loss = g::sub(loss, g::scale(ent_hi, settings.entropy_coef));
        pl_hi_v = pl_hi.item();
        vl_hi_v = vl_hi.item();
        ent_hi_v = ent_hi.item();
      }
      if (settings.high_level) {
        const double draws = std::accumulate(mb.term_mask.begin(), mb.term_mask.end(), 0.0);
        if (draws > 0.0) {
          const std::size_t n = mb.term_mask.size();
          std::vector<double> w_beta(n), w_rest(n);
          for (std::size_t i = 0; i < n; ++i) {
            if (hp.termination_loss == TerminationLoss::kCrossEntropy) {
              w_beta[i] = -mb.term_mask[i] * mb.term_unit[i] / draws;
              w_rest[i] = -mb.term_mask[i] * (1.0 - mb.term_unit[i]) / draws;
            } else {
              w_beta[i] = -mb.term_mask[i] * mb.term_draw[i] * mb.term_adv[i] / draws;
              w_rest[i] = -mb.term_mask[i] * (1.0 - mb.term_draw[i]) * mb.term_adv[i] / draws;
            }
          }
          const g::Tensor term =
              g::add(g::weighted_sum(policy.log_beta(out, mb.prev_skill), w_beta),
                     g::weighted_sum(policy.log_one_minus_beta(out, mb.prev_skill), w_rest));
          loss = g::add(loss, term);
          term_v = term.item();
        }
      }

      if (!std::isfinite(loss.item())) {
        ++stats.aborted_epochs;
        stats.diagnostic = "non-finite loss in epoch " + std::to_string(epoch) +
                           " (policy_lo=" + std::to_string(pl_lo.item()) +
                           ", value_lo=" + std::to_string(vl_lo.item()) + ")";
        break;
      }
      policy.parameters().zero_grad();
      policy.parameters().accumulate_gradients(loss);
      const double norm = hp.max_grad_norm > 0.0 ? policy.parameters().clip_grad_norm(hp.max_grad_norm)
                                                 : policy.parameters().grad_global_norm();
      try {
        grad::adam_step(policy.parameters(), adam, settings.lr);
      } catch (const NumericError& e) {
        ++stats.aborted_epochs;
        stats.diagnostic = "epoch " + std::to_string(epoch) + ": " + e.what();
        break;
      }
      ++stats.minibatches;
      stats.policy_loss_lo += pl_lo.item();
      stats.value_loss_lo += vl_lo.item();
      stats.entropy_lo += ent_lo.item();
      stats.policy_loss_hi += pl_hi_v;
      stats.value_loss_hi += vl_hi_v;
      stats.entropy_hi += ent_hi_v;
      stats.termination_loss += term_v;
      stats.grad_norm += norm;
      sum_kl += kl;
      sum_clip += clip_frac;
    }
  }
  if (stats.minibatches > 0) {
    const double n = stats.minibatches;
    for (double* v : {&stats.policy_loss_lo, &stats.value_loss_lo, &stats.entropy_lo,
                      &stats.policy_loss_hi, &stats.value_loss_hi, &stats.entropy_hi,
                      &stats.termination_loss, &stats.grad_norm}) {
      *v /= n;
    }
    stats.approx_kl = sum_kl / n;
    stats.clip_fraction = sum_clip / n;
  }
  policy.parameters().zero_grad();
  return stats;
}

}  // namespace iad::core
