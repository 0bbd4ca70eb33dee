#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "genac/benchmark.hpp"
#include "genac/train.hpp"

namespace genac {

// ---------------------------------------------------------------------------
// FLOP cost model (generation 2PT / forward 2PT / train 6PT per component)
// ---------------------------------------------------------------------------

struct CostParams {
  double actor_params = 0.0;      // P_a
  double critic_params = 0.0;     // P_c
  double total_tokens = 0.0;      // T, total actor tokens processed
  double avg_segment_len = 0.0;   // L1
  double avg_critic_len = 0.0;    // L2, critic generation per segment
  double avg_branch_len = 0.0;    // L2', branched rollout length
  double branches = 0.0;          // n, branches per prefix
};

enum class CostMethod { ppo, genac, vineppo };

// Analytic FLOPs:
//   PPO     = 10 P_a T + 8 P_c T
//   GenAC   = 10 P_a T + 8 P_c T_c,  T_c = T + (T/L1) L2
//   VinePPO = 10 P_a T + 2 P_a T_r,  T_r = (T/L1) L2' n
// Throws std::invalid_argument when a used parameter is non-positive.
double cost_model(const CostParams& p, CostMethod method);

struct CostRow {
  std::string method;
  double flops = 0.0;
  double pt_units = 0.0;   // flops / (P_a * T)
  double ratio = 0.0;      // vs PPO, rounded to one decimal
};

std::vector<CostRow> cost_table(const CostParams& p);

// Empirical tally over logged token counts, same component formulas.
double measured_flops(const TokenTally& tally, double actor_params, double critic_params);

// ---------------------------------------------------------------------------
// Approximation sweep (capacity x seed, disc vs gen)
// ---------------------------------------------------------------------------

struct SweepOptions {
  std::vector<std::string> families = {"disc", "gen"};
  std::vector<int> capacities = {8, 16, 32};  // embed width; hidden follows
  int n_seeds = 10;
  std::vector<double> disc_lr_grid = {3e-3, 1e-2, 3e-2};  // tuned per capacity
  double gen_lr = 1e-2;                                   // fixed for the gen arm
  ModelDims disc_dims;   // capacity fields overwritten per cell
  ModelDims gen_dims;
  double disc_init_scale = 0.1;
  double gen_init_scale = 0.1;
  PretrainConfig pretrain;     // lr/seed overwritten per cell
  SftDatasetConfig sft_data;   // seed overwritten per seed index
  SftFitConfig sft;
  SegmentRule segment_rule = SegmentRule::fixed(2);
  int max_trace_len = 8;
  std::uint64_t seed = 0;
  int workers = 1;
};

struct SweepCell {
  std::string family;
  int capacity = 0;
  int seed_index = 0;
  double lr = 0.0;
  double mse = 0.0;
  double parse_failure = 0.0;  // gen arm only
};

struct SweepRow {
  std::string family;
  int capacity = 0;
  double lr = 0.0;  // selected from the grid (disc) or fixed (gen)
  double mean_mse = 0.0;
  double std_mse = 0.0;
  std::vector<double> per_seed_mse;
};

struct SweepResult {
  std::vector<SweepCell> cells;  // every trained cell, including unselected lrs
  std::vector<SweepRow> rows;    // one per (family, capacity), best lr
};

SweepResult approx_sweep(const SeqModel& frozen_actor, const TaskSpec& spec,
                         const CriticVocab& vocab, std::span<const LabeledState> benchmark,
                         const SweepOptions& opts);

// ---------------------------------------------------------------------------
// Top-1 ranking probe
// ---------------------------------------------------------------------------

// Scores a candidate state; the stream is that candidate's own derived
// stream (used by random scorers and sampled decodes, ignored otherwise).
using ValueScorer = std::function<double(const MdpState&, RngStream&)>;

ValueScorer oracle_scorer(const SeqModel& frozen_actor, const TaskSpec& spec,
                          const LabelerConfig& labeler);
ValueScorer random_scorer();
ValueScorer disc_scorer(const DiscriminativeCritic& critic);
ValueScorer gen_scorer(const GenCriticBundle& critic, DecodeMode mode);

struct RankProbeOptions {
  std::vector<int> pool_sizes = {2, 4, 8};
  int n_prompts = 500;
  int candidate_len = 2;  // single-segment continuations of this length
  LabelerConfig labeler;
  std::uint64_t seed = 0;
  int workers = 1;
};

struct RankRow {
  int pool_size = 0;
  double top1_accuracy = 0.0;
  double critic_tie_rate = 0.0;
  double oracle_tie_rate = 0.0;
  int n_prompts = 0;
};

// Per prompt: pool-size independent continuations sampled from the frozen
// actor at the shared prompt, ground-truth values from the oracle, accuracy
// of argmax agreement. Ties break toward the lowest candidate index on both
// sides; tie rates are reported.
std::vector<RankRow> ranking_probe(const ValueScorer& scorer, const SeqModel& frozen_actor,
                                   const TaskSpec& spec, const RankProbeOptions& opts);

// ---------------------------------------------------------------------------
// OOD shift ladder
// ---------------------------------------------------------------------------

struct OodLevel {
  std::string name;  // none / mild / moderate / high
  TaskSpec spec;
};

// none = base; mild = skewed digit distribution; moderate = modulus + 2;
// high = modulus + 2 and prompt_len + 4.
std::vector<OodLevel> shift_ladder(const TaskSpec& base);

struct OodOptions {
  int n_states = 200;
  LabelerConfig labeler;
  SegmentRule segment_rule = SegmentRule::fixed(2);
  double actor_init_scale = 0.5;  // fresh frozen actors at shifted dims
  ModelDims actor_dims;           // base actor dims (vocab adjusted per level)
  std::uint64_t seed = 0;
  int workers = 1;
};

struct OodRow {
  std::string level;
  double disc_mse = 0.0;
  double gen_mse = 0.0;
  double gen_parse_failure = 0.0;
  double reduction = 0.0;  // (disc - gen) / disc
  int n_states = 0;
};

// Evaluates critics pretrained on the base spec across the ladder. The base
// frozen actor is reused whenever its dimensions fit the level (none, mild);
// shifted vocabularies get a fresh seeded initial actor of the same family.
std::vector<OodRow> ood_probe(const DiscriminativeCritic& disc, const GenCriticBundle& gen,
                              const SeqModel& base_frozen_actor, const TaskSpec& base,
                              const OodOptions& opts);

// ---------------------------------------------------------------------------
// Pipeline x ICC ablation grid
// ---------------------------------------------------------------------------

struct AblationOptions {
  ModelDims critic_dims;
  double init_scale = 0.1;
  SftDatasetConfig sft_data;
  SftFitConfig sft;
  PretrainConfig rl;
  SegmentRule segment_rule = SegmentRule::fixed(2);
  int max_trace_len = 8;
  std::uint64_t seed = 0;
  int workers = 1;
};

struct AblationCell {
  std::string stage;  // base / sft / rl
  bool icc = false;
  double mse = 0.0;
  double parse_failure = 0.0;
};

// {base, +SFT, +RL} x {w/ ICC, w/o ICC}, all six arms trained from the same
// seeded initialization and evaluated on the shared benchmark.
std::vector<AblationCell> ablation_grid(const SeqModel& frozen_actor, const TaskSpec& spec,
                                        const CriticVocab& vocab,
                                        std::span<const LabeledState> benchmark,
                                        const AblationOptions& opts);

// ---------------------------------------------------------------------------
// Table emission
// ---------------------------------------------------------------------------

void write_cost_csv(const std::filesystem::path& path, std::span<const CostRow> rows);
void write_sweep_csv(const std::filesystem::path& path, const SweepResult& result);
void write_rank_csv(const std::filesystem::path& path, std::span<const RankRow> rows);
void write_ood_csv(const std::filesystem::path& path, std::span<const OodRow> rows);
void write_ablation_csv(const std::filesystem::path& path, std::span<const AblationCell> rows);

nlohmann::json cost_to_json(std::span<const CostRow> rows);
nlohmann::json sweep_to_json(const SweepResult& result);
nlohmann::json rank_to_json(std::span<const RankRow> rows);
nlohmann::json ood_to_json(std::span<const OodRow> rows);
nlohmann::json ablation_to_json(std::span<const AblationCell> rows);

}  // namespace genac
