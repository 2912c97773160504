#include "iad/grad/layers.hpp"

#include <cmath>

#include "iad/common/error.hpp"
#include "iad/grad/ops.hpp"

namespace iad::grad {

namespace {

Tensor normal_tensor(Shape shape, double stddev, Rng& rng) {
  std::vector<double> data(shape_numel(shape));
  for (double& v : data) v = stddev * standard_normal(rng);
  return Tensor::from_data(std::move(shape), std::move(data), true);
}

}  // namespace

Dense::Dense(ParameterSet& params, const std::string& prefix, std::size_t in,
             std::size_t out, Rng& rng, double gain)
    : in_(in), out_(out) {
  weight_ = params.add(prefix + ".weight",
                       normal_tensor({in, out}, gain / std::sqrt(static_cast<double>(in)), rng));
  bias_ = params.add(prefix + ".bias", Tensor::zeros({out}, true));
}

Tensor Dense::forward(const Tensor& x) const {
  if (x.rank() != 2 || x.dim(1) != in_) {
    throw ContractViolation("dense: input " + shape_string(x.shape()) +
                            " does not match weight " + shape_string(weight_.shape()));
  }
  return linear(x, weight_, bias_);
}

Conv2d::Conv2d(ParameterSet& params, const std::string& prefix, std::size_t in_channels,
               std::size_t out_channels, std::size_t kernel, Rng& rng)
    : in_(in_channels), out_(out_channels), kernel_(kernel) {
  if (kernel % 2 == 0) throw ConfigError("conv2d kernel must be odd");
  const double fan_in = static_cast<double>(kernel * kernel * in_channels);
  weight_ = params.add(prefix + ".weight",
                       normal_tensor({kernel, kernel, in_channels, out_channels},
                                     std::sqrt(2.0 / fan_in), rng));
  bias_ = params.add(prefix + ".bias", Tensor::zeros({out_channels}, true));
}

Tensor Conv2d::forward(const Tensor& x) const {
  if (x.rank() != 4 || x.dim(3) != in_) {
    throw ContractViolation("conv2d: input " + shape_string(x.shape()) +
                            " does not match weight " + shape_string(weight_.shape()));
  }
  return conv2d_same(x, weight_, bias_);
}

CellKind parse_cell_kind(const std::string& name) {
  if (name == "lstm") return CellKind::kLstm;
  if (name == "gru") return CellKind::kGru;
  throw ConfigError("unknown recurrent cell kind: " + name);
}

std::string cell_kind_name(CellKind kind) {
  return kind == CellKind::kLstm ? "lstm" : "gru";
}

RecurrentCell::RecurrentCell(ParameterSet& params, const std::string& prefix, CellKind kind,
                             std::size_t input_size, std::size_t hidden_size, Rng& rng)
    : kind_(kind), input_(input_size), hidden_(hidden_size) {
  const double stddev = 1.0 / std::sqrt(static_cast<double>(input_size + hidden_size));
  if (kind == CellKind::kLstm) {
    weight_ = params.add(prefix + ".weight",
                         normal_tensor({input_size + hidden_size, 4 * hidden_size}, stddev, rng));
    // forget gate starts open
    std::vector<double> bias(4 * hidden_size, 0.0);
    for (std::size_t i = hidden_size; i < 2 * hidden_size; ++i) bias[i] = 1.0;
    bias_ = params.add(prefix + ".bias", Tensor::from_data({4 * hidden_size}, bias, true));
  } else {
    weight_ = params.add(prefix + ".gates.weight",
                         normal_tensor({input_size + hidden_size, 2 * hidden_size}, stddev, rng));
    bias_ = params.add(prefix + ".gates.bias", Tensor::zeros({2 * hidden_size}, true));
    candidate_input_weight_ = params.add(
        prefix + ".candidate.input_weight", normal_tensor({input_size, hidden_size}, stddev, rng));
    candidate_hidden_weight_ = params.add(
        prefix + ".candidate.hidden_weight", normal_tensor({hidden_size, hidden_size}, stddev, rng));
    candidate_bias_ = params.add(prefix + ".candidate.bias", Tensor::zeros({hidden_size}, true));
  }
}

RecurrentTensors RecurrentCell::zero_state(std::size_t batch) const {
  RecurrentTensors state;
  state.hidden = Tensor::zeros({batch, hidden_});
  if (kind_ == CellKind::kLstm) state.cell = Tensor::zeros({batch, hidden_});
  return state;
}

RecurrentTensors RecurrentCell::step(const Tensor& x, const RecurrentTensors& state) const {
  if (x.rank() != 2 || x.dim(1) != input_) {
    throw ContractViolation("recurrent cell: input " + shape_string(x.shape()) +
                            " expected (B, " + std::to_string(input_) + ")");
  }
  if (state.hidden.rank() != 2 || state.hidden.dim(0) != x.dim(0) ||
      state.hidden.dim(1) != hidden_) {
    throw ContractViolation("recurrent cell: state " + shape_string(state.hidden.shape()) +
                            " incompatible with input " + shape_string(x.shape()));
  }
  const std::size_t h = hidden_;
  if (kind_ == CellKind::kLstm) {
    const Tensor gates = linear(concat_cols(x, state.hidden), weight_, bias_);
    const Tensor input_gate = sigmoid(slice_cols(gates, 0, h));
    const Tensor forget_gate = sigmoid(slice_cols(gates, h, h));
    const Tensor candidate = tanh(slice_cols(gates, 2 * h, h));
    const Tensor output_gate = sigmoid(slice_cols(gates, 3 * h, h));
    RecurrentTensors next;
    next.cell = add(mul(forget_gate, state.cell), mul(input_gate, candidate));
    next.hidden = mul(output_gate, tanh(next.cell));
    return next;
  }
  const Tensor gates = linear(concat_cols(x, state.hidden), weight_, bias_);
  const Tensor update = sigmoid(slice_cols(gates, 0, h));
  const Tensor reset = sigmoid(slice_cols(gates, h, h));
  const Tensor candidate =
      tanh(add(linear(x, candidate_input_weight_, candidate_bias_),
               mul(reset, matmul(state.hidden, candidate_hidden_weight_))));
  // h' = (1 - u) * n + u * h = n + u * (h - n)
  RecurrentTensors next;
  next.hidden = add(candidate, mul(update, sub(state.hidden, candidate)));
  return next;
}

}  // namespace iad::grad
