#include "iad/grad/parameters.hpp"

#include <algorithm>
#include <cmath>

#include "iad/common/error.hpp"

namespace iad::grad {

Tensor& ParameterSet::add(std::string name, Tensor tensor) {
  if (find(name) != nullptr) throw ContractViolation("duplicate parameter " + name);
  if (!tensor.requires_grad()) {
    throw ContractViolation("parameter " + name + " must require grad");
  }
  entries_.emplace_back(std::move(name), std::move(tensor));
  return entries_.back().second;
}

const Tensor* ParameterSet::find(const std::string& name) const {
  for (const auto& [n, t] : entries_) {
    if (n == name) return &t;
  }
  return nullptr;
}

Tensor* ParameterSet::find(const std::string& name) {
  for (auto& [n, t] : entries_) {
    if (n == name) return &t;
  }
  return nullptr;
}

std::size_t ParameterSet::total_numel() const {
  std::size_t n = 0;
  for (const auto& [name, t] : entries_) n += t.numel();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& [name, t] : entries_) t.zero_grad();
}

std::vector<std::string> ParameterSet::accumulate_gradients(const Tensor& loss) {
  const BackwardResult result = backward(loss);
  std::vector<std::string> detached;
  for (auto& [name, t] : entries_) {
    if (!result.reached(t)) {
      detached.push_back(name);
      t.mutable_grad();  // materialize zeros so optimizers see a full map
    }
  }
  return detached;
}

double ParameterSet::grad_global_norm() const {
  double total = 0.0;
  for (const auto& [name, t] : entries_) {
    for (double g : t.grad()) total += g * g;
  }
  return std::sqrt(total);
}

double ParameterSet::clip_grad_norm(double max_norm) {
  const double norm = grad_global_norm();
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / (norm + 1e-12);
    for (auto& [name, t] : entries_) {
      for (double& g : t.mutable_grad()) g *= factor;
    }
  }
  return norm;
}

void ParameterSet::copy_values_from(const ParameterSet& other) {
  if (other.size() != size()) throw ContractViolation("parameter sets differ in size");
  for (std::size_t i = 0; i < size(); ++i) {
    if (other.name(i) != name(i) || other[i].shape() != (*this)[i].shape()) {
      throw ContractViolation("parameter mismatch at " + name(i));
    }
    auto dst = (*this)[i].mutable_data();
    auto src = other[i].data();
    std::copy(src.begin(), src.end(), dst.begin());
  }
}

}  // namespace iad::grad
