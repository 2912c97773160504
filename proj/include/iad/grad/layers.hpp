#pragma once

#include <string>

#include "iad/common/random.hpp"
#include "iad/grad/parameters.hpp"
#include "iad/grad/tensor.hpp"

namespace iad::grad {

// Fully connected layer: y = x W + b with x (B, in), W (in, out).
class Dense {
 public:
  Dense() = default;
  // Weights ~ N(0, gain^2 / in); bias zero.
  Dense(ParameterSet& params, const std::string& prefix, std::size_t in,
        std::size_t out, Rng& rng, double gain = 1.0);

  Tensor forward(const Tensor& x) const;
  std::size_t in_features() const { return in_; }
  std::size_t out_features() const { return out_; }
  const Tensor& weight() const { return weight_; }
  const Tensor& bias() const { return bias_; }

 private:
  std::size_t in_ = 0;
  std::size_t out_ = 0;
  Tensor weight_;
  Tensor bias_;
};

// k x k convolution, stride 1, "same" zero padding, NHWC activations.
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(ParameterSet& params, const std::string& prefix, std::size_t in_channels,
         std::size_t out_channels, std::size_t kernel, Rng& rng);

  Tensor forward(const Tensor& x) const;
  std::size_t out_channels() const { return out_; }

 private:
  std::size_t in_ = 0;
  std::size_t out_ = 0;
  std::size_t kernel_ = 3;
  Tensor weight_;
  Tensor bias_;
};

enum class CellKind { kLstm, kGru };

CellKind parse_cell_kind(const std::string& name);
std::string cell_kind_name(CellKind kind);

// Hidden state of a recurrent cell. The LSTM uses both parts; the GRU leaves
// `cell` empty.
struct RecurrentTensors {
  Tensor hidden;  // (B, H)
  Tensor cell;    // (B, H) or undefined
};

class RecurrentCell {
 public:
  RecurrentCell() = default;
  RecurrentCell(ParameterSet& params, const std::string& prefix, CellKind kind,
                std::size_t input_size, std::size_t hidden_size, Rng& rng);

  // One step: consumes (B, input) and the previous state, emits the new state.
  RecurrentTensors step(const Tensor& x, const RecurrentTensors& state) const;
  RecurrentTensors zero_state(std::size_t batch) const;

  CellKind kind() const { return kind_; }
  std::size_t hidden_size() const { return hidden_; }
  // Number of state vectors per row (2 for LSTM, 1 for GRU).
  std::size_t state_parts() const { return kind_ == CellKind::kLstm ? 2 : 1; }

 private:
  CellKind kind_ = CellKind::kLstm;
  std::size_t input_ = 0;
  std::size_t hidden_ = 0;
  Tensor weight_;  // (input + hidden, gates * hidden)
  Tensor bias_;
  // GRU candidate path keeps the recurrent matrix separate so the reset gate
  // can scale it.
  Tensor candidate_input_weight_;
  Tensor candidate_hidden_weight_;
  Tensor candidate_bias_;
};

}  // namespace iad::grad
