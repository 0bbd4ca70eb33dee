#include "genac/benchmark.hpp"

#include <stdexcept>

#include "genac/parallel.hpp"

namespace genac {

LabeledState label_state(MdpState state, const SeqModel& frozen_actor, const TaskSpec& spec,
                         const LabelerConfig& labeler, RngStream& rng) {
  LabeledState ls;
  const std::int64_t n = enumeration_size(state, spec);
  if (!labeler.force_mc && n >= 0 && n <= labeler.enumeration_cap) {
    ls.value = exact_value(state, frozen_actor, spec, labeler.enumeration_cap);
    ls.provenance = LabelKind::exact;
  } else {
    ls.value = mc_value(state, frozen_actor, spec, labeler.mc_rollouts, rng);
    ls.provenance = LabelKind::mc;
    ls.mc_rollouts = labeler.mc_rollouts;
  }
  ls.state = std::move(state);
  return ls;
}

std::vector<LabeledState> build_value_benchmark(const SeqModel& frozen_actor,
                                                const TaskSpec& spec, int n_states,
                                                const LabelerConfig& labeler,
                                                const SegmentRule& rule, std::uint64_t seed,
                                                int workers) {
  if (n_states < 1) throw std::invalid_argument("build_value_benchmark: n_states must be >= 1");
  const RngStream root(seed);
  std::vector<LabeledState> out(static_cast<std::size_t>(n_states));
  parallel_for(n_states, workers, [&](int i) {
    RngStream prompt_rng = root.child(static_cast<std::uint64_t>(i)).child(0);
    RngStream action_rng = root.child(static_cast<std::uint64_t>(i)).child(1);
    RngStream label_rng = root.child(static_cast<std::uint64_t>(i)).child(2);
    const Trajectory traj = sample_trajectory(spec, frozen_actor, prompt_rng, action_rng);
    const Segmentation seg = segment(traj.response, rule);
    const std::vector<int> bounds = seg.boundaries();
    // Boundary 0 is the bare prompt; boundary K the full (terminal) response.
    const int pick = label_rng.uniform_int(seg.count() + 1);
    MdpState state;
    state.prompt = traj.prompt;
    if (pick > 0)
      state.partial_response.assign(traj.response.begin(),
                                    traj.response.begin() + bounds[static_cast<std::size_t>(pick - 1)]);
    out[static_cast<std::size_t>(i)] =
        label_state(std::move(state), frozen_actor, spec, labeler, label_rng);
  });
  return out;
}

double benchmark_mse_disc(const DiscriminativeCritic& critic,
                          std::span<const LabeledState> benchmark) {
  if (benchmark.empty()) throw std::invalid_argument("benchmark_mse_disc: empty benchmark");
  double total = 0.0;
  for (const auto& ls : benchmark) {
    const double v = critic.predict(ls.state);
    total += (v - ls.value) * (v - ls.value);
  }
  return total / static_cast<double>(benchmark.size());
}

GenBenchmarkResult benchmark_mse_gen(const GenCriticBundle& critic,
                                     std::span<const LabeledState> benchmark, DecodeMode mode,
                                     std::uint64_t seed, int workers) {
  if (benchmark.empty()) throw std::invalid_argument("benchmark_mse_gen: empty benchmark");
  const RngStream root(seed);
  const int n = static_cast<int>(benchmark.size());
  std::vector<double> sq(static_cast<std::size_t>(n), 0.0);
  std::vector<char> failed(static_cast<std::size_t>(n), 0);
  parallel_for(n, workers, [&](int i) {
    RngStream rng = root.child(static_cast<std::uint64_t>(i));
    const CriticTrace trace = critic.score(benchmark[static_cast<std::size_t>(i)].state, mode,
                                           mode == DecodeMode::sample ? &rng : nullptr);
    double v = 0.5;
    if (trace.parsed_value) {
      v = *trace.parsed_value;
    } else {
      failed[static_cast<std::size_t>(i)] = 1;
    }
    const double d = v - benchmark[static_cast<std::size_t>(i)].value;
    sq[static_cast<std::size_t>(i)] = d * d;
  });
  GenBenchmarkResult r;
  for (int i = 0; i < n; ++i) {
    r.mse += sq[static_cast<std::size_t>(i)];
    r.parse_failure_rate += failed[static_cast<std::size_t>(i)];
  }
  r.mse /= n;
  r.parse_failure_rate /= n;
  return r;
}

}  // namespace genac
