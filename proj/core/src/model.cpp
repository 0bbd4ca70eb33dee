#include "genac/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace genac {

namespace {

// In-place logits -> log-softmax; returns nothing, stable via max shift.
void log_softmax(std::span<double> x) {
  double mx = x[0];
  for (const double v : x) mx = std::max(mx, v);
  double sum = 0.0;
  for (const double v : x) sum += std::exp(v - mx);
  const double lse = mx + std::log(sum);
  for (double& v : x) v -= lse;
}

}  // namespace

double SeqModel::logprob(std::span<const int> context, int token) const {
  if (token < 0 || token >= dims_.vocab_size)
    throw std::invalid_argument("SeqModel::logprob: token out of range: " + std::to_string(token));
  std::vector<double> lp(static_cast<std::size_t>(dims_.vocab_size));
  logprob_all(context, lp);
  return lp[static_cast<std::size_t>(token)];
}

void SeqModel::logprob_all(std::span<const int> context, std::span<double> out) const {
  net_.output(context, out);
  log_softmax(out);
}

void SeqModel::probs(std::span<const int> context, std::span<double> out) const {
  logprob_all(context, out);
  for (double& v : out) v = std::exp(v);
}

int SeqModel::sample(std::span<const int> context, RngStream& rng) const {
  std::vector<double> p(static_cast<std::size_t>(dims_.vocab_size));
  probs(context, p);
  return rng.categorical(p);
}

int SeqModel::greedy(std::span<const int> context) const {
  std::vector<double> logits(static_cast<std::size_t>(dims_.vocab_size));
  net_.output(context, logits);
  int best = 0;
  for (int t = 1; t < dims_.vocab_size; ++t)
    if (logits[static_cast<std::size_t>(t)] > logits[static_cast<std::size_t>(best)]) best = t;
  return best;
}

GradientVector SeqModel::grad_logprob(std::span<const int> context, int token) const {
  GradientVector grad(static_cast<std::size_t>(param_count()), 0.0);
  accumulate_grad_logprob(context, token, 1.0, grad);
  return grad;
}

void SeqModel::accumulate_grad_logprob(std::span<const int> context, int token,
                                       double weight, std::span<double> grad) const {
  if (token < 0 || token >= dims_.vocab_size)
    throw std::invalid_argument("SeqModel::accumulate_grad_logprob: token out of range");
  // d log softmax / d logits = onehot(token) - softmax
  std::vector<double> dlogits(static_cast<std::size_t>(dims_.vocab_size));
  probs(context, dlogits);
  for (double& v : dlogits) v = -weight * v;
  dlogits[static_cast<std::size_t>(token)] += weight;
  net_.accumulate_output_grad(context, dlogits, grad);
}

}  // namespace genac
