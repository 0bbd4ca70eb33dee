#include "genac/env.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace genac {

std::vector<double> TaskSpec::dist() const {
  if (!digit_dist.empty()) return digit_dist;
  return std::vector<double>(static_cast<std::size_t>(modulus), 1.0 / modulus);
}

void TaskSpec::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("TaskSpec: " + msg); };
  if (modulus < 2) fail("modulus must be >= 2");
  if (prompt_len < 1) fail("prompt_len must be >= 1");
  if (!digit_dist.empty()) {
    if (static_cast<int>(digit_dist.size()) != modulus)
      fail("digit_dist must have modulus entries");
    double sum = 0.0;
    for (const double w : digit_dist) {
      if (w < 0.0) fail("digit_dist entries must be >= 0");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) fail("digit_dist must sum to 1");
  }
}

std::vector<int> MdpState::context() const {
  std::vector<int> ctx;
  ctx.reserve(prompt.size() + partial_response.size());
  ctx.insert(ctx.end(), prompt.begin(), prompt.end());
  ctx.insert(ctx.end(), partial_response.begin(), partial_response.end());
  return ctx;
}

MdpState MdpState::extended(int token) const {
  MdpState next = *this;
  next.partial_response.push_back(token);
  return next;
}

std::vector<int> sample_prompt(const TaskSpec& spec, RngStream& rng) {
  spec.validate();
  const std::vector<double> d = spec.dist();
  std::vector<int> prompt(static_cast<std::size_t>(spec.prompt_len));
  for (int& tok : prompt) tok = rng.categorical(d);
  return prompt;
}

double grade(std::span<const int> prompt, std::span<const int> response, const TaskSpec& spec) {
  if (static_cast<int>(response.size()) != spec.horizon())
    throw std::invalid_argument("grade: response length " + std::to_string(response.size()) +
                                " != horizon " + std::to_string(spec.horizon()));
  long long sum = 0;
  for (const int d : prompt) sum += d;
  const int answer = static_cast<int>(sum % spec.modulus);
  return response.back() == answer ? 1.0 : 0.0;
}

std::int64_t enumeration_size(const MdpState& state, const TaskSpec& spec) {
  const int remaining = spec.horizon() - static_cast<int>(state.partial_response.size());
  std::int64_t n = 1;
  for (int i = 0; i < remaining; ++i) {
    if (n > kDefaultEnumerationCap * 1000) return -1;
    n *= spec.modulus;
  }
  return n;
}

namespace {

void enumerate_continuations(const TaskSpec& spec, const SeqModel& policy,
                             std::vector<int>& ctx, int remaining, double weight,
                             std::span<const int> prompt, ExactValueDetail& acc) {
  if (remaining == 0) {
    // ctx = prompt . response; grade on the final token.
    acc.total_prob += weight;
    acc.continuations += 1;
    long long sum = 0;
    for (const int d : prompt) sum += d;
    const int answer = static_cast<int>(sum % spec.modulus);
    if (ctx.back() == answer) acc.value += weight;
    return;
  }
  std::vector<double> p(static_cast<std::size_t>(spec.modulus));
  policy.probs(ctx, p);
  for (int a = 0; a < spec.modulus; ++a) {
    ctx.push_back(a);
    enumerate_continuations(spec, policy, ctx, remaining - 1,
                            weight * p[static_cast<std::size_t>(a)], prompt, acc);
    ctx.pop_back();
  }
}

}  // namespace

ExactValueDetail exact_value_detail(const MdpState& state, const SeqModel& policy,
                                    const TaskSpec& spec, std::int64_t cap) {
  spec.validate();
  if (policy.dims().vocab_size != spec.modulus)
    throw std::invalid_argument("exact_value: policy vocabulary != task modulus");
  const int remaining = spec.horizon() - static_cast<int>(state.partial_response.size());
  if (remaining < 0) throw std::invalid_argument("exact_value: response longer than horizon");

  if (remaining == 0) {
    ExactValueDetail d;
    d.value = grade(state.prompt, state.partial_response, spec);
    d.total_prob = 1.0;
    d.continuations = 1;
    return d;
  }

  const std::int64_t n = enumeration_size(state, spec);
  if (n < 0 || n > cap)
    throw std::runtime_error("exact_value: enumeration of " +
                             (n < 0 ? std::string("overflowing size") : std::to_string(n)) +
                             " continuations exceeds cap " + std::to_string(cap) +
                             "; use mc_value");

  ExactValueDetail acc;
  std::vector<int> ctx = state.context();
  enumerate_continuations(spec, policy, ctx, remaining, 1.0, state.prompt, acc);
  return acc;
}

double exact_value(const MdpState& state, const SeqModel& policy, const TaskSpec& spec,
                   std::int64_t cap) {
  return exact_value_detail(state, policy, spec, cap).value;
}

double mc_value(const MdpState& state, const SeqModel& policy, const TaskSpec& spec,
                int n_rollouts, RngStream& rng) {
  spec.validate();
  if (n_rollouts < 1) throw std::invalid_argument("mc_value: n_rollouts must be >= 1");
  const int remaining = spec.horizon() - static_cast<int>(state.partial_response.size());
  if (remaining < 0) throw std::invalid_argument("mc_value: response longer than horizon");

  double total = 0.0;
  std::vector<int> ctx;
  std::vector<int> response;
  for (int i = 0; i < n_rollouts; ++i) {
    ctx = state.context();
    response = state.partial_response;
    for (int t = 0; t < remaining; ++t) {
      const int a = policy.sample(ctx, rng);
      ctx.push_back(a);
      response.push_back(a);
    }
    total += grade(state.prompt, response, spec);
  }
  return total / n_rollouts;
}

Trajectory sample_response(const TaskSpec& spec, const SeqModel& policy,
                           std::vector<int> prompt, RngStream& action_rng) {
  Trajectory traj;
  traj.prompt = std::move(prompt);
  std::vector<int> ctx = traj.prompt;
  const int horizon = spec.horizon();
  traj.response.reserve(static_cast<std::size_t>(horizon));
  traj.old_logprobs.reserve(static_cast<std::size_t>(horizon));
  std::vector<double> lp(static_cast<std::size_t>(policy.dims().vocab_size));
  for (int t = 0; t < horizon; ++t) {
    policy.logprob_all(ctx, lp);
    // Sample from the same distribution without a second forward pass.
    std::vector<double> p(lp.size());
    for (std::size_t i = 0; i < lp.size(); ++i) p[i] = std::exp(lp[i]);
    const int a = action_rng.categorical(p);
    traj.response.push_back(a);
    traj.old_logprobs.push_back(lp[static_cast<std::size_t>(a)]);
    ctx.push_back(a);
  }
  traj.reward = grade(traj.prompt, traj.response, spec);
  return traj;
}

Trajectory sample_trajectory(const TaskSpec& spec, const SeqModel& policy,
                             RngStream& prompt_rng, RngStream& action_rng) {
  return sample_response(spec, policy, sample_prompt(spec, prompt_rng), action_rng);
}

}  // namespace genac
