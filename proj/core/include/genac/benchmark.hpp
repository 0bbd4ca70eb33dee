#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "genac/advantage.hpp"
#include "genac/critic.hpp"
#include "genac/env.hpp"
#include "genac/model.hpp"

namespace genac {

// A state truncated at a segment boundary with its ground-truth value under
// a frozen policy.
enum class LabelKind { exact, mc };

struct LabeledState {
  MdpState state;
  double value = 0.0;
  LabelKind provenance = LabelKind::exact;
  int mc_rollouts = 0;  // only for provenance == mc
};

struct LabelerConfig {
  std::int64_t enumeration_cap = kDefaultEnumerationCap;
  int mc_rollouts = 4096;  // fallback beyond the cap
  bool force_mc = false;
};

// Label one state: exact enumeration when it fits under the cap, otherwise
// Monte Carlo with the configured rollout count.
LabeledState label_state(MdpState state, const SeqModel& frozen_actor, const TaskSpec& spec,
                         const LabelerConfig& labeler, RngStream& rng);

// States drawn from frozen-actor rollouts, truncated at a uniformly chosen
// segment boundary (0 = bare prompt, last = terminal response).
std::vector<LabeledState> build_value_benchmark(const SeqModel& frozen_actor,
                                                const TaskSpec& spec, int n_states,
                                                const LabelerConfig& labeler,
                                                const SegmentRule& rule, std::uint64_t seed,
                                                int workers = 1);

double benchmark_mse_disc(const DiscriminativeCritic& critic,
                          std::span<const LabeledState> benchmark);

struct GenBenchmarkResult {
  double mse = 0.0;
  double parse_failure_rate = 0.0;
};

// MSE of decoded value predictions against the labels. A parse failure
// contributes prediction 0.5 (midpoint fallback) and is counted.
GenBenchmarkResult benchmark_mse_gen(const GenCriticBundle& critic,
                                     std::span<const LabeledState> benchmark, DecodeMode mode,
                                     std::uint64_t seed = 0, int workers = 1);

}  // namespace genac
