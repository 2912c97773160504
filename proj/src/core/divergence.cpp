#include "iad/core/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "iad/common/error.hpp"

namespace iad::core {

namespace {

void require_normalized(std::span<const double> p, const char* what) {
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) throw ContractViolation(std::string(what) + " has a negative or NaN entry");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-6) {
    throw ContractViolation(std::string(what) + " sums to " + std::to_string(total));
  }
}

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

}  // namespace

std::vector<double> marginal_action_dist(std::span<const double> skill_dist,
                                         std::span<const double> conditionals) {
  const std::size_t z_count = skill_dist.size();
  if (z_count == 0 || conditionals.size() % z_count != 0) {
    throw ContractViolation("conditionals of size " + std::to_string(conditionals.size()) +
                            " do not form " + std::to_string(z_count) + " rows");
  }
  const std::size_t a_count = conditionals.size() / z_count;
  require_normalized(skill_dist, "skill distribution");
  for (std::size_t z = 0; z < z_count; ++z) {
    require_normalized(conditionals.subspan(z * a_count, a_count), "conditional action distribution");
  }
  std::vector<double> out(a_count, 0.0);
  for (std::size_t z = 0; z < z_count; ++z) {
    for (std::size_t a = 0; a < a_count; ++a) out[a] += skill_dist[z] * conditionals[z * a_count + a];
  }
  return out;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ContractViolation("kl_divergence: size mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) kl += p[i] * (std::log(p[i]) - std::log(std::max(q[i], kProbabilityFloor)));
  }
  // Rounding can leave a tiny negative value for (nearly) identical inputs.
  return std::max(kl, 0.0);
}

double intrinsic_reward(int skill, std::span<const double> skill_dist,
                        std::span<const double> conditionals) {
  const std::vector<double> marginal = marginal_action_dist(skill_dist, conditionals);
  if (skill < 0 || static_cast<std::size_t>(skill) >= skill_dist.size()) {
    throw ContractViolation("skill " + std::to_string(skill) + " out of range");
  }
  const std::size_t a_count = marginal.size();
  return kl_divergence(conditionals.subspan(static_cast<std::size_t>(skill) * a_count, a_count),
                       marginal);
}

double js_divergence(const std::vector<std::span<const double>>& dists) {
  if (dists.empty()) throw ContractViolation("js_divergence of no distributions");
  const std::size_t n = dists.front().size();
  std::vector<double> mean(n, 0.0);
  double mean_entropy = 0.0;
  for (const auto& d : dists) {
    if (d.size() != n) throw ContractViolation("js_divergence: size mismatch");
    for (std::size_t i = 0; i < n; ++i) mean[i] += d[i] / static_cast<double>(dists.size());
    mean_entropy += entropy(d) / static_cast<double>(dists.size());
  }
  return std::max(entropy(mean) - mean_entropy, 0.0);
}

}  // namespace iad::core
