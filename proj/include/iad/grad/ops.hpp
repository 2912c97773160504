#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "iad/grad/tensor.hpp"

// Differentiable operations. Shapes are checked eagerly and mismatches raise
// ContractViolation naming both shapes. Matrices are rank-2 row-major
// (rows = batch); images are NHWC.
namespace iad::grad {

// elementwise, identical shapes
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor minimum(const Tensor& a, const Tensor& b);

Tensor neg(const Tensor& x);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);
Tensor relu(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
// log(sigmoid(x)) evaluated without overflow for large |x|.
Tensor log_sigmoid(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor square(const Tensor& x);
// Gradient passes only where lo < x < hi.
Tensor clamp(const Tensor& x, double lo, double hi);

// reductions to a scalar
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// sum_i weights[i] * x[i]; weights are constants.
Tensor weighted_sum(const Tensor& x, std::span<const double> weights);

// (B, N) -> (B)
Tensor row_sum(const Tensor& x);

// (B, K) x (K, N) -> (B, N)
Tensor matmul(const Tensor& a, const Tensor& b);
// x (B, K), weight (K, N), bias (N) -> (B, N)
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);
// x (B, N) + row (N) broadcast over rows
Tensor add_row(const Tensor& x, const Tensor& row);

// Row-wise over the last axis of a (B, N) matrix.
Tensor softmax(const Tensor& logits);
Tensor log_softmax(const Tensor& logits);

// x (B, N), one column index per row -> (B)
Tensor gather_cols(const Tensor& x, std::span<const std::size_t> index);
// table (Z, N), one row index per output row -> (len(index), N)
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> index);
Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t count);
Tensor slice_rows(const Tensor& x, std::size_t start, std::size_t count);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor reshape(const Tensor& x, Shape shape);

// x (B, H, W, C_in), weight (k, k, C_in, C_out), bias (C_out) ->
// (B, H, W, C_out). Stride 1, zero padding preserving H and W; k odd.
Tensor conv2d_same(const Tensor& x, const Tensor& weight, const Tensor& bias);

}  // namespace iad::grad
