#pragma once

#include <span>
#include <vector>

#include "genac/net.hpp"
#include "genac/rng.hpp"

namespace genac {

// Shape of a SeqModel; output dimension is always the vocabulary.
struct ModelDims {
  int vocab_size = 0;
  int context_window = 4;
  int embed_dim = 8;
  int hidden_dim = 0;
  int max_positions = 16;

  NetDims net_dims() const {
    return NetDims{vocab_size, context_window, embed_dim,
                   hidden_dim, vocab_size, max_positions};
  }
  std::int64_t param_count() const { return net_dims().param_count(); }
};

// Parametric autoregressive categorical sequence model: softmax over the
// vocabulary given the trailing-window features of the context. Shared
// family for the actor policy and the generative critic.
class SeqModel {
 public:
  explicit SeqModel(ModelDims dims) : dims_(dims), net_(dims.net_dims()) {}

  static SeqModel random_init(ModelDims dims, double scale, RngStream& rng) {
    SeqModel m(dims);
    m.net_.randomize(scale, rng);
    return m;
  }

  const ModelDims& dims() const { return dims_; }
  std::int64_t param_count() const { return net_.param_count(); }
  std::span<const double> params() const { return net_.params(); }
  std::span<double> mutable_params() { return net_.mutable_params(); }

  // log pi(token | context); exp over the vocabulary sums to 1.
  double logprob(std::span<const int> context, int token) const;

  // Full log-softmax over the vocabulary.
  void logprob_all(std::span<const int> context, std::span<double> out) const;

  void probs(std::span<const int> context, std::span<double> out) const;

  int sample(std::span<const int> context, RngStream& rng) const;

  // Argmax token; ties broken toward the lowest id.
  int greedy(std::span<const int> context) const;

  // Analytic d log pi(token|context) / d params as a dense vector.
  GradientVector grad_logprob(std::span<const int> context, int token) const;

  // Accumulates weight * d log pi(token|context) / d params into grad.
  void accumulate_grad_logprob(std::span<const int> context, int token,
                               double weight, std::span<double> grad) const;

 private:
  ModelDims dims_;
  FeedForwardNet net_;
};

inline void sgd_step(SeqModel& model, std::span<const double> grad, double lr) {
  sgd_step(model.mutable_params(), grad, lr);
}

}  // namespace genac
