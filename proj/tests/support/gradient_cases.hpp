#pragma once

// Finite-difference gradient cases, one per layer kind, shared by the unit
// tests and the acceptance run.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "finite_difference.hpp"
#include "iad/common/random.hpp"
#include "iad/grad/layers.hpp"
#include "iad/grad/ops.hpp"

namespace iad::testing::gradient_cases {

using namespace iad::grad;

inline Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0, bool requires_grad = false) {
  std::vector<double> data(shape_numel(shape));
  for (double& v : data) v = scale * standard_normal(rng);
  return Tensor::from_data(std::move(shape), std::move(data), requires_grad);
}

inline GradientCheck dense_layer(std::uint64_t seed) {
  Rng rng(seed);
  ParameterSet params;
  Dense dense(params, "d", 5, 4, rng);
  const Tensor x = random_tensor({3, 5}, rng);
  const Tensor target = random_tensor({3, 4}, rng);
  return check_gradients(
      params, [&] { return sum(square(sub(dense.forward(x), target))); });
}

inline GradientCheck conv_layer(std::uint64_t seed) {
  Rng rng(seed);
  ParameterSet params;
  Conv2d conv(params, "c", 3, 4, 3, rng);
  const Tensor x = random_tensor({2, 4, 5, 3}, rng);
  const Tensor weights = random_tensor({2, 4, 5, 4}, rng);
  return check_gradients(params, [&] {
    return weighted_sum(tanh(conv.forward(x)), weights.data());
  });
}

inline GradientCheck conv_input_gradient(std::uint64_t seed) {
  Rng rng(seed);
  ParameterSet params;
  params.add("input", random_tensor({1, 3, 4, 2}, rng, 1.0, true));
  const Tensor w = random_tensor({3, 3, 2, 3}, rng);
  const Tensor b = random_tensor({3}, rng);
  return check_gradients(params, [&] {
    return sum(square(conv2d_same(params[0], w, b)));
  });
}

inline GradientCheck lstm_cell_over_sequence(std::uint64_t seed) {
  Rng rng(seed);
  ParameterSet params;
  RecurrentCell cell(params, "rnn", CellKind::kLstm, 3, 4, rng);
  std::vector<Tensor> inputs;
  for (int t = 0; t < 4; ++t) inputs.push_back(random_tensor({2, 3}, rng));
  return check_gradients(params, [&] {
    RecurrentTensors state = cell.zero_state(2);
    Tensor total = Tensor::scalar(0.0);
    for (const auto& x : inputs) {
      state = cell.step(x, state);
      total = add(total, sum(mul(state.hidden, state.hidden)));
    }
    return total;
  });
}

inline GradientCheck gru_cell_over_sequence(std::uint64_t seed) {
  Rng rng(seed);
  ParameterSet params;
  RecurrentCell cell(params, "rnn", CellKind::kGru, 3, 4, rng);
  std::vector<Tensor> inputs;
  for (int t = 0; t < 4; ++t) inputs.push_back(random_tensor({2, 3}, rng));
  return check_gradients(params, [&] {
    RecurrentTensors state = cell.zero_state(2);
    Tensor total = Tensor::scalar(0.0);
    for (const auto& x : inputs) {
      state = cell.step(x, state);
      total = add(total, sum(state.hidden));
    }
    return total;
  });
}

inline GradientCheck softmax_layer(std::uint64_t seed) {
  Rng rng(seed);
  ParameterSet params;
  params.add("logits", random_tensor({3, 5}, rng, 1.0, true));
  const Tensor weights = random_tensor({3, 5}, rng);
  return check_gradients(params, [&] {
    return weighted_sum(softmax(params[0]), weights.data());
  });
}

inline GradientCheck two_layer_mlp_with_softmax_cross_entropy(std::uint64_t seed) {
  Rng rng(seed);
  ParameterSet params;
  Dense hidden(params, "mlp.hidden", 6, 8, rng);
  Dense output(params, "mlp.out", 8, 4, rng);
  const Tensor x = random_tensor({5, 6}, rng);
  std::vector<std::size_t> labels(5);
  for (auto& l : labels) l = rng() % 4;
  return check_gradients(params, [&] {
    const Tensor logp = log_softmax(output.forward(relu(hidden.forward(x))));
    return neg(mean(gather_cols(logp, labels)));
  });
}

inline GradientCheck elementwise_and_indexing_ops(std::uint64_t seed) {
  Rng rng(seed);
  ParameterSet params;
  params.add("a", random_tensor({4, 3}, rng, 1.0, true));
  params.add("b", random_tensor({4, 3}, rng, 1.0, true));
  params.add("table", random_tensor({5, 3}, rng, 1.0, true));
  const std::vector<std::size_t> rows = {4, 0, 2, 2};
  return check_gradients(params, [&] {
    const Tensor& a = params[0];
    const Tensor& b = params[1];
    Tensor x = add(a, gather_rows(params[2], rows));
    x = minimum(mul(x, b), clamp(exp(scale(b, 0.3)), 0.5, 1.5));
    const Tensor joined = concat_cols(slice_cols(x, 1, 2), log_sigmoid(a));
    const Tensor stacked = concat_rows({slice_rows(joined, 0, 2), slice_rows(sigmoid(joined), 2, 2)});
    return add(sum(row_sum(stacked)), mean(log(add_scalar(square(reshape(a, {12})), 1.0))));
  });
}

struct Case {
  std::string name;
  std::function<GradientCheck(std::uint64_t)> run;
};

inline const std::vector<Case>& layer_cases() {
  static const std::vector<Case> cases = {
      {"dense", dense_layer},
      {"conv2d", conv_layer},
      {"conv2d_input", conv_input_gradient},
      {"lstm", lstm_cell_over_sequence},
      {"gru", gru_cell_over_sequence},
      {"softmax", softmax_layer},
      {"mlp_cross_entropy", two_layer_mlp_with_softmax_cross_entropy},
      {"elementwise_ops", elementwise_and_indexing_ops},
  };
  return cases;
}

}  // namespace iad::testing::gradient_cases
