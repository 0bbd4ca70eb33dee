#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "genac/rng.hpp"

namespace genac {

// Dense gradient aligned to a network's parameter vector.
using GradientVector = std::vector<double>;

// Shape of the fixed-window feed-forward family shared by the actor policy,
// the generative critic, and the discriminative critic's feature map.
struct NetDims {
  int vocab_size = 0;      // token alphabet; one extra feature column is PAD
  int context_window = 4;  // k trailing tokens featurized
  int embed_dim = 8;       // d, first capacity knob
  int hidden_dim = 0;      // h, optional second layer (0 = none)
  int output_dim = 0;
  int max_positions = 16;  // position one-hot buckets (clamped beyond)

  int feature_dim() const { return context_window * (vocab_size + 1) + max_positions; }
  int top_dim() const { return hidden_dim > 0 ? hidden_dim : embed_dim; }

  // Closed-form parameter count:
  //   P = d*F + d  (embed layer)
  //     + [h*d + h]  (hidden layer, if h > 0)
  //     + out*top + out  (output layer),  F = k*(V+1) + max_positions.
  std::int64_t param_count() const;

  void validate() const;  // throws std::invalid_argument
};

// Feed-forward network over one-hot features of the last k context tokens
// plus a position one-hot:
//
//   a = tanh(W_e x + b_e)            embed layer, d units
//   z = tanh(W_h a + b_h)            hidden layer (only when h > 0)
//   out = W_o (z or a) + b_o         linear output
//
// Zero parameters give identically zero outputs (uniform softmax upstream).
// Forward and backward touch only the active feature columns, so cost is
// O(k*d + h*d + out*top) per call regardless of vocabulary size.
class FeedForwardNet {
 public:
  explicit FeedForwardNet(NetDims dims);

  const NetDims& dims() const { return dims_; }
  std::int64_t param_count() const { return static_cast<std::int64_t>(params_.size()); }
  std::span<const double> params() const { return params_; }
  std::span<double> mutable_params() { return params_; }

  void randomize(double scale, RngStream& rng);

  // Raw output (pre-softmax / pre-squash) for the token following `context`.
  void output(std::span<const int> context, std::span<double> out) const;

  // Backprop of d(loss)/d(output) through the net; accumulates += into
  // `grad`, which must have param_count() entries.
  void accumulate_output_grad(std::span<const int> context,
                              std::span<const double> dout,
                              std::span<double> grad) const;

 private:
  void active_columns(std::span<const int> context, std::span<int> cols) const;
  void embed(std::span<const int> cols, std::span<double> a) const;

  NetDims dims_;
  std::vector<double> params_;
  // Offsets into params_ (layout documented in net.cpp).
  std::int64_t off_be_, off_wh_, off_bh_, off_wo_, off_bo_;
};

// One SGD step: params -= lr * grad.
void sgd_step(std::span<double> params, std::span<const double> grad, double lr);

// Optimizer with the update rules used by the trainers. Plain SGD is the
// default; momentum and Adam are config options.
class Optimizer {
 public:
  enum class Kind { sgd, momentum, adam };

  Optimizer(Kind kind, double lr, std::size_t n_params);

  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }

  void step(std::span<double> params, std::span<const double> grad);

  static Kind parse_kind(const std::string& name);  // "sgd" | "momentum" | "adam"

 private:
  Kind kind_;
  double lr_;
  double momentum_beta_ = 0.9;
  double adam_beta1_ = 0.9, adam_beta2_ = 0.999, adam_eps_ = 1e-8;
  std::int64_t t_ = 0;
  std::vector<double> m_, v_;
};

}  // namespace genac
