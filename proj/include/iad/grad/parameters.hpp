#pragma once

#include <string>
#include <utility>
#include <vector>

#include "iad/grad/tensor.hpp"

namespace iad::grad {

// Ordered, named collection of trainable leaves. Names are dot-separated
// paths ("backbone.conv1.weight") and are the keys of the checkpoint format.
class ParameterSet {
 public:
  Tensor& add(std::string name, Tensor tensor);

  std::size_t size() const { return entries_.size(); }
  const std::string& name(std::size_t i) const { return entries_[i].first; }
  Tensor& operator[](std::size_t i) { return entries_[i].second; }
  const Tensor& operator[](std::size_t i) const { return entries_[i].second; }
  const Tensor* find(const std::string& name) const;
  Tensor* find(const std::string& name);

  std::size_t total_numel() const;
  void zero_grad();

  // Runs backward from `loss` and returns the names of parameters the loss
  // does not depend on. Those keep a zero gradient; callers decide whether a
  // detached parameter is an error.
  std::vector<std::string> accumulate_gradients(const Tensor& loss);

  double grad_global_norm() const;
  // Rescales all gradients so the global L2 norm is at most `max_norm`.
  // Returns the norm before clipping.
  double clip_grad_norm(double max_norm);

  // Copies values (not gradients) from another set with identical names and
  // shapes.
  void copy_values_from(const ParameterSet& other);

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

}  // namespace iad::grad
