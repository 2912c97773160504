#include "iad/grad/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "iad/common/error.hpp"

namespace iad::grad {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

using NodePtr = std::shared_ptr<detail::Node>;

// Builds the result node; the graph edge and closure are only kept when
// recording is enabled and some input needs a gradient.
Tensor make_result(Shape shape, std::vector<double> data,
                   std::vector<NodePtr> inputs, const char* op,
                   std::function<void(detail::Node&)> backward_fn) {
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->op = op;
  bool needs = false;
  if (grad_enabled()) {
    for (const auto& in : inputs) needs = needs || in->requires_grad;
  }
  if (needs) {
    node->requires_grad = true;
    node->inputs = std::move(inputs);
    node->backward = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ContractViolation(std::string(op) + ": shape mismatch " +
                            shape_string(a.shape()) + " vs " +
                            shape_string(b.shape()));
  }
}

void require_rank(const char* op, const Tensor& x, std::size_t rank) {
  if (x.rank() != rank) {
    throw ContractViolation(std::string(op) + ": expected rank " +
                            std::to_string(rank) + ", got shape " +
                            shape_string(x.shape()));
  }
}

// Shared skeleton for unary elementwise ops: derivative is expressed through
// the input value x and the output value y.
template <typename Forward, typename Derivative>
Tensor unary(const char* op, const Tensor& x, Forward f, Derivative df) {
  std::vector<double> out(x.numel());
  const auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  return make_result(x.shape(), std::move(out), {x.node()}, op,
                     [df](detail::Node& self) {
                       auto& input = *self.inputs[0];
                       if (!input.requires_grad) return;
                       auto& g = input.ensure_grad();
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         g[i] += self.grad[i] * df(input.data[i], self.data[i]);
                       }
                     });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) + b.at(i);
  return make_result(a.shape(), std::move(out), {a.node(), b.node()}, "add",
                     [](detail::Node& self) {
                       for (auto& in : self.inputs) {
                         if (!in->requires_grad) continue;
                         auto& g = in->ensure_grad();
                         for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                       }
                     });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) - b.at(i);
  return make_result(a.shape(), std::move(out), {a.node(), b.node()}, "sub",
                     [](detail::Node& self) {
                       auto& lhs = *self.inputs[0];
                       auto& rhs = *self.inputs[1];
                       if (lhs.requires_grad) {
                         auto& g = lhs.ensure_grad();
                         for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                       }
                       if (rhs.requires_grad) {
                         auto& g = rhs.ensure_grad();
                         for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
                       }
                     });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * b.at(i);
  return make_result(a.shape(), std::move(out), {a.node(), b.node()}, "mul",
                     [](detail::Node& self) {
                       auto& lhs = *self.inputs[0];
                       auto& rhs = *self.inputs[1];
                       if (lhs.requires_grad) {
                         auto& g = lhs.ensure_grad();
                         for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * rhs.data[i];
                       }
                       if (rhs.requires_grad) {
                         auto& g = rhs.ensure_grad();
                         for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * lhs.data[i];
                       }
                     });
}

Tensor minimum(const Tensor& a, const Tensor& b) {
  require_same_shape("minimum", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(a.at(i), b.at(i));
  // ties route the gradient to the first argument
  return make_result(a.shape(), std::move(out), {a.node(), b.node()}, "minimum",
                     [](detail::Node& self) {
                       auto& lhs = *self.inputs[0];
                       auto& rhs = *self.inputs[1];
                       for (std::size_t i = 0; i < self.grad.size(); ++i) {
                         const bool take_lhs = lhs.data[i] <= rhs.data[i];
                         auto& target = take_lhs ? lhs : rhs;
                         if (target.requires_grad) target.ensure_grad()[i] += self.grad[i];
                       }
                     });
}

Tensor neg(const Tensor& x) { return scale(x, -1.0); }

Tensor scale(const Tensor& x, double factor) {
  return unary(
      "scale", x, [factor](double v) { return factor * v; },
      [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double value) {
  return unary(
      "add_scalar", x, [value](double v) { return v + value; },
      [](double, double) { return 1.0; });
}

Tensor relu(const Tensor& x) {
  return unary(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(const Tensor& x) {
  return unary(
      "tanh", x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      "sigmoid", x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor log_sigmoid(const Tensor& x) {
  return unary(
      "log_sigmoid", x,
      [](double v) {
        // -softplus(-v)
        return v >= 0.0 ? -std::log1p(std::exp(-v)) : v - std::log1p(std::exp(v));
      },
      [](double v, double) {
        // d/dv log(sigmoid(v)) = 1 - sigmoid(v)
        if (v >= 0.0) {
          const double e = std::exp(-v);
          return e / (1.0 + e);
        }
        return 1.0 / (1.0 + std::exp(v));
      });
}

Tensor exp(const Tensor& x) {
  return unary(
      "exp", x, [](double v) { return std::exp(v); },
      [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  for (double v : x.data()) {
    if (!(v > 0.0)) throw NumericError("log of non-positive value " + std::to_string(v));
  }
  return unary(
      "log", x, [](double v) { return std::log(v); },
      [](double v, double) { return 1.0 / v; });
}

Tensor square(const Tensor& x) {
  return unary(
      "square", x, [](double v) { return v * v; },
      [](double v, double) { return 2.0 * v; });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  if (lo > hi) throw ContractViolation("clamp: lo > hi");
  return unary(
      "clamp", x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double v, double) { return (v > lo && v < hi) ? 1.0 : 0.0; });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return make_result({}, {total}, {x.node()}, "sum", [](detail::Node& self) {
    auto& input = *self.inputs[0];
    auto& g = input.ensure_grad();
    for (double& v : g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  const std::size_t n = x.numel();
  if (n == 0) throw ContractViolation("mean of empty tensor");
  double total = 0.0;
  for (double v : x.data()) total += v;
  const double inv = 1.0 / static_cast<double>(n);
  return make_result({}, {total * inv}, {x.node()}, "mean",
                     [inv](detail::Node& self) {
                       auto& g = self.inputs[0]->ensure_grad();
                       for (double& v : g) v += self.grad[0] * inv;
                     });
}

Tensor weighted_sum(const Tensor& x, std::span<const double> weights) {
  if (weights.size() != x.numel()) {
    throw ContractViolation("weighted_sum: " + std::to_string(weights.size()) +
                            " weights for shape " + shape_string(x.shape()));
  }
  double total = 0.0;
  const auto in = x.data();
  for (std::size_t i = 0; i < weights.size(); ++i) total += weights[i] * in[i];
  std::vector<double> w(weights.begin(), weights.end());
  return make_result({}, {total}, {x.node()}, "weighted_sum",
                     [w = std::move(w)](detail::Node& self) {
                       auto& g = self.inputs[0]->ensure_grad();
                       for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[0] * w[i];
                     });
}

Tensor row_sum(const Tensor& x) {
  require_rank("row_sum", x, 2);
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  std::vector<double> out(rows, 0.0);
  const auto in = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[r] += in[r * cols + c];
  }
  return make_result({rows}, std::move(out), {x.node()}, "row_sum",
                     [rows, cols](detail::Node& self) {
                       auto& g = self.inputs[0]->ensure_grad();
                       for (std::size_t r = 0; r < rows; ++r) {
                         for (std::size_t c = 0; c < cols; ++c) g[r * cols + c] += self.grad[r];
                       }
                     });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  if (a.dim(1) != b.dim(0)) {
    throw ContractViolation("matmul: inner dimensions differ " +
                            shape_string(a.shape()) + " x " + shape_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n);
  MatMap(out.data(), m, n).noalias() =
      ConstMatMap(a.data().data(), m, k) * ConstMatMap(b.data().data(), k, n);
  return make_result({m, n}, std::move(out), {a.node(), b.node()}, "matmul",
                     [m, k, n](detail::Node& self) {
                       auto& lhs = *self.inputs[0];
                       auto& rhs = *self.inputs[1];
                       ConstMatMap dy(self.grad.data(), m, n);
                       if (lhs.requires_grad) {
                         MatMap(lhs.ensure_grad().data(), m, k).noalias() +=
                             dy * ConstMatMap(rhs.data.data(), k, n).transpose();
                       }
                       if (rhs.requires_grad) {
                         MatMap(rhs.ensure_grad().data(), k, n).noalias() +=
                             ConstMatMap(lhs.data.data(), m, k).transpose() * dy;
                       }
                     });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank("linear", x, 2);
  require_rank("linear", weight, 2);
  require_rank("linear", bias, 1);
  if (x.dim(1) != weight.dim(0) || bias.dim(0) != weight.dim(1)) {
    throw ContractViolation("linear: input " + shape_string(x.shape()) +
                            " incompatible with weight " + shape_string(weight.shape()) +
                            " and bias " + shape_string(bias.shape()));
  }
  const std::size_t m = x.dim(0), k = x.dim(1), n = weight.dim(1);
  std::vector<double> out(m * n);
  MatMap y(out.data(), m, n);
  y.noalias() = ConstMatMap(x.data().data(), m, k) * ConstMatMap(weight.data().data(), k, n);
  const auto b = bias.data();
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] += b[c];
  }
  return make_result(
      {m, n}, std::move(out), {x.node(), weight.node(), bias.node()}, "linear",
      [m, k, n](detail::Node& self) {
        auto& in = *self.inputs[0];
        auto& w = *self.inputs[1];
        auto& b = *self.inputs[2];
        ConstMatMap dy(self.grad.data(), m, n);
        if (in.requires_grad) {
          MatMap(in.ensure_grad().data(), m, k).noalias() +=
              dy * ConstMatMap(w.data.data(), k, n).transpose();
        }
        if (w.requires_grad) {
          MatMap(w.ensure_grad().data(), k, n).noalias() +=
              ConstMatMap(in.data.data(), m, k).transpose() * dy;
        }
        if (b.requires_grad) {
          auto& g = b.ensure_grad();
          for (std::size_t r = 0; r < m; ++r) {
            for (std::size_t c = 0; c < n; ++c) g[c] += self.grad[r * n + c];
          }
        }
      });
}

Tensor add_row(const Tensor& x, const Tensor& row) {
  require_rank("add_row", x, 2);
  require_rank("add_row", row, 1);
  if (x.dim(1) != row.dim(0)) {
    throw ContractViolation("add_row: " + shape_string(x.shape()) + " + " +
                            shape_string(row.shape()));
  }
  const std::size_t m = x.dim(0), n = x.dim(1);
  std::vector<double> out(x.data().begin(), x.data().end());
  const auto r = row.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += r[j];
  }
  return make_result(x.shape(), std::move(out), {x.node(), row.node()}, "add_row",
                     [m, n](detail::Node& self) {
                       auto& in = *self.inputs[0];
                       auto& rw = *self.inputs[1];
                       if (in.requires_grad) {
                         auto& g = in.ensure_grad();
                         for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                       }
                       if (rw.requires_grad) {
                         auto& g = rw.ensure_grad();
                         for (std::size_t i = 0; i < m; ++i) {
                           for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[i * n + j];
                         }
                       }
                     });
}

Tensor log_softmax(const Tensor& logits) {
  require_rank("log_softmax", logits, 2);
  const std::size_t rows = logits.dim(0), cols = logits.dim(1);
  const auto in = logits.data();
  std::vector<double> out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = in.data() + r * cols;
    double mx = x[0];
    for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, x[c]);
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) total += std::exp(x[c] - mx);
    const double lse = mx + std::log(total);
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = x[c] - lse;
  }
  return make_result(logits.shape(), std::move(out), {logits.node()}, "log_softmax",
                     [rows, cols](detail::Node& self) {
                       auto& g = self.inputs[0]->ensure_grad();
                       for (std::size_t r = 0; r < rows; ++r) {
                         const double* dy = self.grad.data() + r * cols;
                         const double* y = self.data.data() + r * cols;
                         double total = 0.0;
                         for (std::size_t c = 0; c < cols; ++c) total += dy[c];
                         for (std::size_t c = 0; c < cols; ++c) {
                           g[r * cols + c] += dy[c] - std::exp(y[c]) * total;
                         }
                       }
                     });
}

Tensor softmax(const Tensor& logits) {
  require_rank("softmax", logits, 2);
  const std::size_t rows = logits.dim(0), cols = logits.dim(1);
  const auto in = logits.data();
  std::vector<double> out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = in.data() + r * cols;
    double mx = x[0];
    for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, x[c]);
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      out[r * cols + c] = std::exp(x[c] - mx);
      total += out[r * cols + c];
    }
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] /= total;
  }
  return make_result(logits.shape(), std::move(out), {logits.node()}, "softmax",
                     [rows, cols](detail::Node& self) {
                       auto& g = self.inputs[0]->ensure_grad();
                       for (std::size_t r = 0; r < rows; ++r) {
                         const double* dy = self.grad.data() + r * cols;
                         const double* y = self.data.data() + r * cols;
                         double dot = 0.0;
                         for (std::size_t c = 0; c < cols; ++c) dot += dy[c] * y[c];
                         for (std::size_t c = 0; c < cols; ++c) {
                           g[r * cols + c] += y[c] * (dy[c] - dot);
                         }
                       }
                     });
}

Tensor gather_cols(const Tensor& x, std::span<const std::size_t> index) {
  require_rank("gather_cols", x, 2);
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  if (index.size() != rows) {
    throw ContractViolation("gather_cols: " + std::to_string(index.size()) +
                            " indices for shape " + shape_string(x.shape()));
  }
  std::vector<double> out(rows);
  std::vector<std::size_t> idx(index.begin(), index.end());
  for (std::size_t r = 0; r < rows; ++r) {
    if (idx[r] >= cols) throw ContractViolation("gather_cols: index out of range");
    out[r] = x.at(r * cols + idx[r]);
  }
  return make_result({rows}, std::move(out), {x.node()}, "gather_cols",
                     [cols, idx = std::move(idx)](detail::Node& self) {
                       auto& g = self.inputs[0]->ensure_grad();
                       for (std::size_t r = 0; r < idx.size(); ++r) {
                         g[r * cols + idx[r]] += self.grad[r];
                       }
                     });
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> index) {
  require_rank("gather_rows", table, 2);
  const std::size_t rows = table.dim(0), cols = table.dim(1);
  std::vector<std::size_t> idx(index.begin(), index.end());
  std::vector<double> out(idx.size() * cols);
  const auto in = table.data();
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= rows) throw ContractViolation("gather_rows: index out of range");
    std::copy_n(in.begin() + static_cast<std::ptrdiff_t>(idx[r] * cols), cols,
                out.begin() + static_cast<std::ptrdiff_t>(r * cols));
  }
  const std::size_t n = idx.size();
  return make_result({n, cols}, std::move(out), {table.node()}, "gather_rows",
                     [cols, idx = std::move(idx)](detail::Node& self) {
                       auto& g = self.inputs[0]->ensure_grad();
                       for (std::size_t r = 0; r < idx.size(); ++r) {
                         for (std::size_t c = 0; c < cols; ++c) {
                           g[idx[r] * cols + c] += self.grad[r * cols + c];
                         }
                       }
                     });
}

Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t count) {
  require_rank("slice_cols", x, 2);
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  if (start + count > cols) {
    throw ContractViolation("slice_cols: [" + std::to_string(start) + ", " +
                            std::to_string(start + count) + ") out of " +
                            shape_string(x.shape()));
  }
  std::vector<double> out(rows * count);
  const auto in = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(in.begin() + static_cast<std::ptrdiff_t>(r * cols + start), count,
                out.begin() + static_cast<std::ptrdiff_t>(r * count));
  }
  return make_result({rows, count}, std::move(out), {x.node()}, "slice_cols",
                     [rows, cols, start, count](detail::Node& self) {
                       auto& g = self.inputs[0]->ensure_grad();
                       for (std::size_t r = 0; r < rows; ++r) {
                         for (std::size_t c = 0; c < count; ++c) {
                           g[r * cols + start + c] += self.grad[r * count + c];
                         }
                       }
                     });
}

Tensor slice_rows(const Tensor& x, std::size_t start, std::size_t count) {
  if (x.rank() == 0) throw ContractViolation("slice_rows on a scalar");
  const std::size_t rows = x.dim(0);
  if (start + count > rows) {
    throw ContractViolation("slice_rows: [" + std::to_string(start) + ", " +
                            std::to_string(start + count) + ") out of " +
                            shape_string(x.shape()));
  }
  const std::size_t stride = x.numel() / rows;
  Shape shape = x.shape();
  shape[0] = count;
  const auto in = x.data();
  std::vector<double> out(in.begin() + static_cast<std::ptrdiff_t>(start * stride),
                          in.begin() + static_cast<std::ptrdiff_t>((start + count) * stride));
  const std::size_t offset = start * stride;
  return make_result(std::move(shape), std::move(out), {x.node()}, "slice_rows",
                     [offset](detail::Node& self) {
                       auto& g = self.inputs[0]->ensure_grad();
                       for (std::size_t i = 0; i < self.grad.size(); ++i) {
                         g[offset + i] += self.grad[i];
                       }
                     });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  require_rank("concat_cols", a, 2);
  require_rank("concat_cols", b, 2);
  if (a.dim(0) != b.dim(0)) {
    throw ContractViolation("concat_cols: row counts differ " + shape_string(a.shape()) +
                            " vs " + shape_string(b.shape()));
  }
  const std::size_t rows = a.dim(0), ca = a.dim(1), cb = b.dim(1), cols = ca + cb;
  std::vector<double> out(rows * cols);
  const auto da = a.data();
  const auto db = b.data();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(da.begin() + static_cast<std::ptrdiff_t>(r * ca), ca,
                out.begin() + static_cast<std::ptrdiff_t>(r * cols));
    std::copy_n(db.begin() + static_cast<std::ptrdiff_t>(r * cb), cb,
                out.begin() + static_cast<std::ptrdiff_t>(r * cols + ca));
  }
  return make_result({rows, cols}, std::move(out), {a.node(), b.node()}, "concat_cols",
                     [rows, ca, cb, cols](detail::Node& self) {
                       auto& lhs = *self.inputs[0];
                       auto& rhs = *self.inputs[1];
                       if (lhs.requires_grad) {
                         auto& g = lhs.ensure_grad();
                         for (std::size_t r = 0; r < rows; ++r) {
                           for (std::size_t c = 0; c < ca; ++c) g[r * ca + c] += self.grad[r * cols + c];
                         }
                       }
                       if (rhs.requires_grad) {
                         auto& g = rhs.ensure_grad();
                         for (std::size_t r = 0; r < rows; ++r) {
                           for (std::size_t c = 0; c < cb; ++c) g[r * cb + c] += self.grad[r * cols + ca + c];
                         }
                       }
                     });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractViolation("concat_rows of nothing");
  Shape shape = parts.front().shape();
  if (shape.empty()) throw ContractViolation("concat_rows of scalars");
  std::size_t rows = 0;
  for (const auto& p : parts) {
    Shape tail(p.shape().begin() + 1, p.shape().end());
    Shape want(shape.begin() + 1, shape.end());
    if (p.rank() != shape.size() || tail != want) {
      throw ContractViolation("concat_rows: incompatible shapes " + shape_string(shape) +
                              " and " + shape_string(p.shape()));
    }
    rows += p.dim(0);
  }
  shape[0] = rows;
  std::vector<double> out;
  out.reserve(shape_numel(shape));
  std::vector<NodePtr> inputs;
  for (const auto& p : parts) {
    out.insert(out.end(), p.data().begin(), p.data().end());
    inputs.push_back(p.node());
  }
  return make_result(std::move(shape), std::move(out), std::move(inputs), "concat_rows",
                     [](detail::Node& self) {
                       std::size_t offset = 0;
                       for (auto& in : self.inputs) {
                         const std::size_t n = in->data.size();
                         if (in->requires_grad) {
                           auto& g = in->ensure_grad();
                           for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[offset + i];
                         }
                         offset += n;
                       }
                     });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ContractViolation("reshape: " + shape_string(x.shape()) + " to " +
                            shape_string(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return make_result(std::move(shape), std::move(out), {x.node()}, "reshape",
                     [](detail::Node& self) {
                       auto& g = self.inputs[0]->ensure_grad();
                       for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                     });
}

Tensor conv2d_same(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank("conv2d", x, 4);
  require_rank("conv2d", weight, 4);
  require_rank("conv2d", bias, 1);
  const std::size_t batch = x.dim(0), height = x.dim(1), width = x.dim(2), cin = x.dim(3);
  const std::size_t k = weight.dim(0), cout = weight.dim(3);
  if (weight.dim(1) != k || k % 2 == 0 || weight.dim(2) != cin || bias.dim(0) != cout) {
    throw ContractViolation("conv2d: input " + shape_string(x.shape()) +
                            " incompatible with weight " + shape_string(weight.shape()) +
                            " and bias " + shape_string(bias.shape()));
  }
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
  const std::size_t rows = batch * height * width;
  const std::size_t patch = k * k * cin;

  // im2col with (ky, kx, c) column order, matching the weight layout
  auto cols = std::make_shared<std::vector<double>>(rows * patch, 0.0);
  const auto in = x.data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t xx = 0; xx < width; ++xx) {
        double* dst = cols->data() + ((b * height + y) * width + xx) * patch;
        for (std::size_t ky = 0; ky < k; ++ky) {
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - pad;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(height)) continue;
          for (std::size_t kx = 0; kx < k; ++kx) {
            const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(xx + kx) - pad;
            if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(width)) continue;
            const double* src = in.data() + ((b * height + static_cast<std::size_t>(sy)) * width +
                                             static_cast<std::size_t>(sx)) * cin;
            std::copy_n(src, cin, dst + (ky * k + kx) * cin);
          }
        }
      }
    }
  }

  std::vector<double> out(rows * cout);
  MatMap(out.data(), rows, cout).noalias() =
      ConstMatMap(cols->data(), rows, patch) * ConstMatMap(weight.data().data(), patch, cout);
  const auto bv = bias.data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cout; ++c) out[r * cout + c] += bv[c];
  }

  return make_result(
      {batch, height, width, cout}, std::move(out), {x.node(), weight.node(), bias.node()},
      "conv2d",
      [=](detail::Node& self) {
        auto& input = *self.inputs[0];
        auto& w = *self.inputs[1];
        auto& b = *self.inputs[2];
        ConstMatMap dy(self.grad.data(), rows, cout);
        if (w.requires_grad) {
          MatMap(w.ensure_grad().data(), patch, cout).noalias() +=
              ConstMatMap(cols->data(), rows, patch).transpose() * dy;
        }
        if (b.requires_grad) {
          auto& g = b.ensure_grad();
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cout; ++c) g[c] += self.grad[r * cout + c];
          }
        }
        if (input.requires_grad) {
          RowMatrix dcols = dy * ConstMatMap(w.data.data(), patch, cout).transpose();
          auto& g = input.ensure_grad();
          for (std::size_t bb = 0; bb < batch; ++bb) {
            for (std::size_t y = 0; y < height; ++y) {
              for (std::size_t xx = 0; xx < width; ++xx) {
                const double* src = dcols.data() + ((bb * height + y) * width + xx) * patch;
                for (std::size_t ky = 0; ky < k; ++ky) {
                  const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - pad;
                  if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(height)) continue;
                  for (std::size_t kx = 0; kx < k; ++kx) {
                    const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(xx + kx) - pad;
                    if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(width)) continue;
                    double* dst = g.data() + ((bb * height + static_cast<std::size_t>(sy)) * width +
                                              static_cast<std::size_t>(sx)) * cin;
                    const double* s = src + (ky * k + kx) * cin;
                    for (std::size_t c = 0; c < cin; ++c) dst[c] += s[c];
                  }
                }
              }
            }
          }
        }
      });
}

}  // namespace iad::grad
