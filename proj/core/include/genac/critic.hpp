#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "genac/env.hpp"
#include "genac/model.hpp"
#include "genac/net.hpp"
#include "genac/rng.hpp"

namespace genac {

// ---------------------------------------------------------------------------
// Generative critic token alphabet
// ---------------------------------------------------------------------------

// Trace tokens occupy fixed ids so parsing is independent of the task:
//   0..15   R_0..R_15      reasoning tokens
//   16..26  SCORE_0..SCORE_10
//   27      EOT
// Context-only tokens follow, sized by (t_cap, p_cap) headroom so one critic
// can serialize states from a whole shift ladder of tasks:
//   28            BOS
//   29..39        HINT_0..HINT_10    ICC success-rate bucket
//   40..47        SIZE_0..SIZE_7     ICC actor-size tag
//   48            SEP
//   49..49+t_cap  STEP_0..STEP_t_cap
//   50+t_cap..    DIGIT_0..DIGIT_{p_cap-1}
struct CriticVocab {
  int t_cap = 0;  // largest response/prompt length the vocab can serialize
  int p_cap = 0;  // largest digit alphabet

  static constexpr int kReasonCount = 16;
  static constexpr int kScoreCount = 11;
  static constexpr int kSizeTags = 8;

  int reason(int i) const;
  int score(int k) const;  // k in [0,10]
  int eot() const { return 27; }
  int bos() const { return 28; }
  int hint(int bucket) const;  // bucket in [0,10]
  int size_tag(int s) const;   // s in [0,7]
  int sep() const { return 48; }
  int step_mark(int step_index) const;  // step_index in [0, t_cap]
  int digit(int value) const;           // value in [0, p_cap)
  int size() const { return 50 + t_cap + p_cap; }

  // Score index k if the token is SCORE_k.
  static std::optional<int> as_score(int token);

  // Headroom that covers the task plus the ood shift ladder (p+2, m+4).
  static CriticVocab for_task(const TaskSpec& spec, int extra_p = 2, int extra_t = 4);
};

// ---------------------------------------------------------------------------
// In-Context Conditioning
// ---------------------------------------------------------------------------

// Smoothed running average of the actor's success rate.
struct IccHint {
  double value = 0.0;     // r_bar, starts at 0
  double momentum = 0.9;  // c
};

// r_bar' = c * r_bar + (1 - c) * r
IccHint update_hint(IccHint hint, double reward);

// round(10 * r_bar), clamped to [0,10].
int hint_bucket(double r_bar);

// Actor-size tag from its embedding width (log2 bucket).
int actor_size_tag(const ModelDims& actor_dims);

// ---------------------------------------------------------------------------
// Context serialization and traces
// ---------------------------------------------------------------------------

// Serialized critic input. With ICC enabled the layout is
//   BOS HINT_b SIZE_a STEP_t SEP x... SEP y...
// and without it the hint and size tokens are omitted entirely, so contexts
// for the same state are byte-identical across hint values.
struct CriticContext {
  std::vector<int> tokens;
};

CriticContext build_context(const MdpState& state, const IccHint& hint, int actor_tag,
                            bool icc_enabled, const CriticVocab& vocab);

enum class DecodeMode { sample, greedy };

DecodeMode parse_decode_mode(const std::string& name);

// Generated critic tokens plus the parsed value (absent on parse failure).
struct CriticTrace {
  std::vector<int> tokens;
  std::optional<double> parsed_value;
};

// First SCORE_k token maps to k/10; no score token means failure.
std::optional<double> parse_value(std::span<const int> trace, const CriticVocab& vocab);

// Autoregressive decode from the critic model, stopping at EOT or
// max_trace_len. `rng` may be null in greedy mode.
CriticTrace gen_trace(const SeqModel& critic, const CriticContext& context,
                      int max_trace_len, DecodeMode mode, RngStream* rng,
                      const CriticVocab& vocab);

// R_v = 1 - (r - v_hat)^2, or exactly 0 on parse failure.
double critic_reward(const CriticTrace& trace, double observed_reward);

// Unit of critic experience for REINFORCE.
struct CriticEpisode {
  CriticContext context;
  CriticTrace trace;
  double reward = 0.0;  // R_v
};

// REINFORCE loss L = -sum_ep R_v * sum_t log p(z_t | ctx . z_<t) and its
// gradient (accumulated into grad_out). With `mean_baseline` the gradient
// weights are centered by the batch-mean reward; the returned loss always
// uses the raw rewards.
double reinforce_critic_loss(const SeqModel& critic, std::span<const CriticEpisode> episodes,
                             std::span<double> grad_out, bool mean_baseline = false);

// ---------------------------------------------------------------------------
// Scripted SFT oracle
// ---------------------------------------------------------------------------

struct SftExample {
  CriticContext context;
  std::vector<int> target;  // reasoning tokens, score token, EOT
};

// Deterministic reasoning trace for a state: R_{min(step-1,15)} encodes the
// step count, R_{0|1} whether the partial response tracks the prompt's
// running prefix sums, then SCORE_round(10*clip(v* + eps, 0, 1)) with
// eps ~ N(0, eta^2), then EOT.
std::vector<int> synthesize_sft_trace(const MdpState& state, const TaskSpec& spec,
                                      double oracle_value, double eta, RngStream& rng,
                                      const CriticVocab& vocab);

// Line-oriented dataset file: one record per line,
//   ctx_tok ctx_tok ...<TAB>tgt_tok tgt_tok ...
// with tokens as decimal ids. Round-trips exactly.
void write_sft_dataset(const std::filesystem::path& path, std::span<const SftExample> data);
std::vector<SftExample> read_sft_dataset(const std::filesystem::path& path);

struct SftFitConfig {
  double lr = 1e-2;
  int epochs = 10;
  int minibatch = 32;
  std::uint64_t seed = 0;
  std::string optimizer = "sgd";
};

struct SftFitResult {
  std::vector<double> nll_curve;  // mean NLL per epoch, measured before updates
};

// Maximum-likelihood fit of the critic model on target traces.
SftFitResult sft_fit(SeqModel& critic, std::span<const SftExample> data, const SftFitConfig& cfg);

// ---------------------------------------------------------------------------
// Discriminative critic
// ---------------------------------------------------------------------------

// One-shot scalar value head over the same feature family as SeqModel. With
// the sigmoid head (default) outputs live in [0,1].
class DiscriminativeCritic {
 public:
  DiscriminativeCritic(ModelDims dims, bool sigmoid_head = true);

  static DiscriminativeCritic random_init(ModelDims dims, bool sigmoid_head, double scale,
                                          RngStream& rng);

  const ModelDims& dims() const { return dims_; }
  bool sigmoid_head() const { return sigmoid_head_; }
  std::int64_t param_count() const { return net_.param_count(); }
  std::span<const double> params() const { return net_.params(); }
  std::span<double> mutable_params() { return net_.mutable_params(); }

  double predict(std::span<const int> state_tokens) const;
  double predict(const MdpState& state) const { return predict(state.context()); }

  // Accumulates weight * d((v - target)^2)/d params into grad.
  void accumulate_mse_grad(std::span<const int> state_tokens, double target, double weight,
                           std::span<double> grad) const;

 private:
  ModelDims dims_;
  bool sigmoid_head_;
  FeedForwardNet net_;
};

struct DiscSample {
  std::vector<int> state_tokens;
  double target = 0.0;
};

struct DiscFitConfig {
  double lr = 1e-2;
  int steps = 1000;
  int minibatch = 32;
  std::uint64_t seed = 0;
  std::string optimizer = "sgd";
};

struct DiscFitResult {
  std::vector<double> mse_curve;  // minibatch MSE before each update
  double final_mse = 0.0;         // full-dataset MSE after the last step
};

// Minibatch SGD on mean squared error toward the sample targets.
DiscFitResult disc_fit(DiscriminativeCritic& critic, std::span<const DiscSample> data,
                       const DiscFitConfig& cfg);

// ---------------------------------------------------------------------------
// Generative critic bundle
// ---------------------------------------------------------------------------

// Everything needed to query a generative critic as a value function.
struct GenCriticBundle {
  SeqModel model;
  CriticVocab vocab;
  IccHint hint;
  int actor_tag = 0;
  bool icc_enabled = true;
  int max_trace_len = 8;

  // Greedy (or sampled) value estimate for a state; parse failures fall back
  // to `fallback` (0.5 when unset) and are counted by the caller via the
  // returned trace.
  CriticTrace score(const MdpState& state, DecodeMode mode, RngStream* rng) const;
};

}  // namespace genac
