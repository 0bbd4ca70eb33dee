#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "genac/model.hpp"
#include "genac/rng.hpp"

namespace genac {

inline constexpr std::int64_t kDefaultEnumerationCap = 1'000'000;

// One member of the synthetic task family: generate T = prompt_len response
// tokens after an m-digit prompt; reward 1 iff the final token equals the
// prompt digit sum mod p. All intermediate tokens are ungraded.
struct TaskSpec {
  int modulus = 5;                 // p: answer vocabulary size
  int prompt_len = 6;              // m: prompt digits
  std::vector<double> digit_dist;  // empty = uniform over {0..p-1}
  std::uint64_t seed = 0;          // root of the prompt streams

  int horizon() const { return prompt_len; }  // T = m

  // Resolved digit distribution (uniform when unset).
  std::vector<double> dist() const;

  void validate() const;  // throws std::invalid_argument
};

// State s = x . y_{<t}: prompt plus the response generated so far.
// step() == |partial_response| + 1, in [1, T+1].
struct MdpState {
  std::vector<int> prompt;
  std::vector<int> partial_response;

  int step() const { return static_cast<int>(partial_response.size()) + 1; }
  bool terminal(const TaskSpec& spec) const {
    return static_cast<int>(partial_response.size()) == spec.horizon();
  }
  // Concatenated token view fed to models.
  std::vector<int> context() const;
  MdpState extended(int token) const;
};

// Unit of actor experience: a full response with its terminal reward and the
// per-token log-probs recorded at sampling time.
struct Trajectory {
  std::vector<int> prompt;
  std::vector<int> response;
  double reward = 0.0;
  std::vector<double> old_logprobs;
};

// m i.i.d. digits from the spec's digit distribution.
std::vector<int> sample_prompt(const TaskSpec& spec, RngStream& rng);

// 1.0 iff the final response token equals (sum of prompt digits) mod p.
// Throws std::invalid_argument when |response| != T.
double grade(std::span<const int> prompt, std::span<const int> response, const TaskSpec& spec);

// Exact success probability from `state` under `policy`, by full enumeration
// of the p^(T-t+1) continuations. Throws std::runtime_error when the
// enumeration exceeds `cap` (use mc_value instead).
double exact_value(const MdpState& state, const SeqModel& policy, const TaskSpec& spec,
                   std::int64_t cap = kDefaultEnumerationCap);

// Enumeration detail exposed for oracle cross-checks: total probability mass
// visited must be 1 within 1e-9.
struct ExactValueDetail {
  double value = 0.0;
  double total_prob = 0.0;
  std::int64_t continuations = 0;
};
ExactValueDetail exact_value_detail(const MdpState& state, const SeqModel& policy,
                                    const TaskSpec& spec, std::int64_t cap = kDefaultEnumerationCap);

// Number of continuations exact_value would enumerate, or -1 on overflow.
std::int64_t enumeration_size(const MdpState& state, const TaskSpec& spec);

// Mean terminal reward of n independent policy continuations from `state`.
double mc_value(const MdpState& state, const SeqModel& policy, const TaskSpec& spec,
                int n_rollouts, RngStream& rng);

// Samples a prompt from `prompt_rng`, then a full response from `policy`
// driven by `action_rng`, recording old log-probs and the terminal reward.
Trajectory sample_trajectory(const TaskSpec& spec, const SeqModel& policy,
                             RngStream& prompt_rng, RngStream& action_rng);

// As above with the prompt fixed.
Trajectory sample_response(const TaskSpec& spec, const SeqModel& policy,
                           std::vector<int> prompt, RngStream& action_rng);

}  // namespace genac
