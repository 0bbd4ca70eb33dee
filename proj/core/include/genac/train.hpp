#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "genac/advantage.hpp"
#include "genac/benchmark.hpp"
#include "genac/critic.hpp"
#include "genac/env.hpp"
#include "genac/metrics.hpp"
#include "genac/model.hpp"

namespace genac {

// Purpose tags for hierarchical RNG stream derivation. Per-trajectory streams
// are children of (seed, purpose, iteration, index), which makes every draw
// independent of worker scheduling.
namespace stream {
inline constexpr std::uint64_t kTrainPrompt = 1;
inline constexpr std::uint64_t kActorSample = 2;
inline constexpr std::uint64_t kCriticTrace = 3;
inline constexpr std::uint64_t kEvalPrompt = 4;
inline constexpr std::uint64_t kEvalSample = 5;
inline constexpr std::uint64_t kBenchmark = 6;
inline constexpr std::uint64_t kInit = 7;
inline constexpr std::uint64_t kSft = 8;
inline constexpr std::uint64_t kPretrain = 9;
}  // namespace stream

struct PpoConfig {
  double clip_eps = 0.2;
  double gamma = 1.0;
  double lambda = 1.0;
  int batch_size = 64;      // prompts per iteration
  int minibatch_size = 16;  // trajectories per update
  int group_size = 8;       // responses per prompt (GRPO / RLOO)
  int epochs = 1;           // passes over each batch
  double actor_lr = 1e-2;
  double critic_lr = 1e-2;
  int max_iters = 300;
  std::uint64_t seed = 0;

  void validate() const;  // throws std::invalid_argument
};

// Token counts by cost-model component. FLOPs follow the 2/2/6 decomposition
// (generation / forward / train) per token pass; the generative critic's
// processed count uses the T_c convention: longest actor prefix plus
// generated trace tokens per trajectory.
struct TokenTally {
  double actor_generated = 0.0;
  double actor_forward = 0.0;
  double actor_trained = 0.0;
  double disc_forward = 0.0;
  double disc_trained = 0.0;
  double gen_critic_processed = 0.0;
  double gen_critic_trained = 0.0;

  TokenTally& operator+=(const TokenTally& o);
};

double tally_flops(const TokenTally& t, double actor_params, double critic_params);

// Clipped-surrogate actor loss, summed over all tokens of the minibatch:
//   L = -sum_t min(rho_t A_t, clip(rho_t, 1-eps, 1+eps) A_t),
//   rho_t = exp(log pi(a_t|s_t) - old_logprob_t).
// The analytic gradient is accumulated into grad_out. There is no KL term.
double ppo_actor_loss(const SeqModel& actor, std::span<const Trajectory> trajectories,
                      std::span<const AdvantageVector> advantages, double clip_eps,
                      std::span<double> grad_out);

// avg@k evaluation: success rate over `samples` sampled responses for each of
// `prompts` held-out prompts (held out by stream purpose, not by rejection).
double evaluate_actor(const TaskSpec& spec, const SeqModel& actor, int prompts, int samples,
                      std::uint64_t seed, int workers = 1);

struct EvalOptions {
  int prompts = 50;
  int samples = 16;
  int every = 10;  // evaluate every N iterations (and on the last)
};

struct TrainHooks {
  std::function<void(const IterationMetrics&)> on_iteration;
  // Called for every trajectory scored by run_genac with its per-token
  // advantages, broadcast token values, and terminal reward.
  std::function<void(std::span<const double>, std::span<const double>, double)>
      on_genac_advantages;
};

struct TrainerOptions {
  ModelDims actor_dims;
  double actor_init_scale = 0.5;
  std::string optimizer = "sgd";
  int workers = 1;
  EvalOptions eval;
  TrainHooks hooks;
};

struct TrainResult {
  std::vector<IterationMetrics> metrics;
  SeqModel actor;
  std::optional<GenCriticBundle> gen_critic;
  std::optional<DiscriminativeCritic> disc_critic;
  TokenTally tally;
};

// Value-free trainers: uniform per-token advantages from group rewards.
TrainResult run_grpo(const TaskSpec& spec, const PpoConfig& ppo, const TrainerOptions& opts);
TrainResult run_rloo(const TaskSpec& spec, const PpoConfig& ppo, const TrainerOptions& opts);

struct VcppoOptions {
  ModelDims critic_dims;
  double critic_init_scale = 0.1;
  bool sigmoid_head = true;
  std::optional<DiscriminativeCritic> pretrained;  // value-pretrained critic
};

// PPO with a discriminative critic: per-token values, GAE advantages, critic
// regressed toward lambda-returns each minibatch.
TrainResult run_vcppo(const TaskSpec& spec, const PpoConfig& ppo, const TrainerOptions& opts,
                      const VcppoOptions& vc);

struct GenacOptions {
  SegmentRule segment_rule = SegmentRule::fixed(2);
  bool critic_mean_baseline = false;
};

// Joint training with the generative critic: segment-level sampled traces,
// parsed values broadcast to tokens, GAE (default gamma=lambda=1, reducing
// advantages to r - v), PPO actor step then REINFORCE critic step per
// minibatch. The ICC hint starts at 0 and is updated per trajectory at
// sampling time; a trace that fails to parse contributes the current hint as
// its value and earns the critic R_v = 0.
TrainResult run_genac(const TaskSpec& spec, const PpoConfig& ppo, const TrainerOptions& opts,
                      GenCriticBundle critic, const GenacOptions& gen);

// ---------------------------------------------------------------------------
// Critic pretraining against a frozen actor
// ---------------------------------------------------------------------------

struct PretrainConfig {
  int max_rounds = 200;
  int rollouts_per_round = 32;
  double lr = 1e-2;
  int minibatch = 32;
  std::string optimizer = "sgd";
  int eval_every = 5;  // rounds between validation evaluations
  double saturation_delta = 1e-4;
  int saturation_patience = 10;  // evals without improvement before stopping
  std::uint64_t seed = 0;
  int workers = 1;
};

struct DiscPretrainResult {
  DiscriminativeCritic critic;
  std::vector<double> val_mse_curve;
  double final_val_mse = 0.0;
  int rounds_run = 0;
  TokenTally tally;
};

// Fits the critic to Monte-Carlo returns of the frozen actor (with a
// terminal-only reward and lambda=1 the return from every state of a
// trajectory is its terminal reward). Stops when validation MSE saturates.
DiscPretrainResult pretrain_disc_critic(const SeqModel& frozen_actor, const TaskSpec& spec,
                                        DiscriminativeCritic critic,
                                        std::span<const LabeledState> validation,
                                        const PretrainConfig& cfg);

struct GenPretrainResult {
  GenCriticBundle critic;
  std::vector<double> val_mse_curve;
  std::vector<double> mean_rv_curve;
  std::vector<double> parse_failure_curve;
  double final_val_mse = 0.0;
  double final_parse_failure = 0.0;
  int rounds_run = 0;
  TokenTally tally;
};

// REINFORCE on R_v over segment states of frozen-actor rollouts, starting
// from an SFT-initialized critic. Stops when validation MSE (greedy decode)
// saturates.
GenPretrainResult pretrain_gen_critic(const SeqModel& frozen_actor, const TaskSpec& spec,
                                      GenCriticBundle critic, const SegmentRule& rule,
                                      std::span<const LabeledState> validation,
                                      const PretrainConfig& cfg);

// ---------------------------------------------------------------------------
// SFT stage inputs
// ---------------------------------------------------------------------------

struct SftDatasetConfig {
  int n_examples = 2000;
  double eta = 0.1;  // oracle score noise
  bool icc_enabled = true;
  double icc_momentum = 0.9;
  int actor_tag = 0;
  SegmentRule segment_rule = SegmentRule::fixed(2);
  LabelerConfig labeler;
  std::uint64_t seed = 0;
};

struct SftDataset {
  std::vector<SftExample> examples;
  IccHint final_hint;
};

// Rolls out the frozen actor, truncates at every segment boundary, labels
// with the value oracle, and synthesizes target traces. The ICC hint is
// tracked across trajectories exactly as training would see it.
SftDataset build_sft_dataset(const SeqModel& frozen_actor, const TaskSpec& spec,
                             const CriticVocab& vocab, const SftDatasetConfig& cfg);

}  // namespace genac
