#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "genac/critic.hpp"
#include "genac/env.hpp"
#include "genac/model.hpp"
#include "genac/probes.hpp"
#include "genac/train.hpp"

namespace genac {

// Exit-code mapping for the CLI: config errors exit 2, missing artifacts 3,
// anything else 4.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MissingArtifactError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NetConfig {
  int context_window = 4;
  int embed_dim = 8;
  int hidden_dim = 0;
  double init_scale = 0.5;
};

struct SftStageConfig {
  int examples = 2000;
  int epochs = 10;
  double lr = 5e-2;
  int minibatch = 32;
};

struct RlStageConfig {
  int max_rounds = 150;
  int rollouts_per_round = 32;
  double lr = 1e-2;
  int minibatch = 32;
  int eval_every = 5;
  double saturation_delta = 1e-4;
  int saturation_patience = 10;
};

struct CriticSection {
  std::string family = "gen";  // gen | disc
  NetConfig net{24, 16, 16, 0.1};
  bool icc_enabled = true;
  double icc_momentum = 0.9;
  int max_trace_len = 8;
  int segment_len = 2;
  double sft_eta = 0.1;
  std::string decode = "greedy";  // probe/eval decoding
  bool sigmoid_head = true;
  int p_extra = 2;  // vocabulary headroom over the task (ood ladder)
  int t_extra = 4;
  std::string init_checkpoint;  // pretrained critic for train/probes
  SftStageConfig sft;
  RlStageConfig rl;
  int validation_states = 200;
};

struct EvalSection {
  int prompts = 50;
  int samples = 16;
  int every = 10;
};

struct CostSection {
  double actor_params = 1.0;
  double critic_params = 1.0;
  double total_tokens = 1.0;
  double avg_segment_len = 120.0;
  double avg_critic_len = 300.0;
  double avg_branch_len = 1024.0;
  double branches = 4.0;
};

struct ApproxSection {
  std::vector<int> capacities = {8, 16, 32};
  int n_seeds = 5;
  std::vector<double> disc_lr_grid = {3e-3, 1e-2, 3e-2};
  double gen_lr = 1e-2;
  int benchmark_states = 200;
};

struct RankSection {
  std::vector<int> pool_sizes = {2, 4, 8};
  int n_prompts = 500;
  std::string scorer = "gen";  // gen | disc | oracle | random
  std::string critic_checkpoint;
};

struct OodSection {
  int n_states = 200;
  std::string disc_checkpoint;
  std::string gen_checkpoint;
};

struct AblationSection {
  int benchmark_states = 200;
};

struct ProbeSection {
  std::string name = "cost";  // approx | rank | ood | ablation | cost
  CostSection cost;
  ApproxSection approx;
  RankSection rank;
  OodSection ood;
  AblationSection ablation;
};

// Full declarative run description. Unknown keys anywhere in the file are
// rejected with the offending dotted path.
struct RunConfig {
  int schema_version = 1;
  std::uint64_t seed = 1;
  std::string out_dir;  // empty: $GENAC_OUT_ROOT or ./runs
  std::string algorithm = "genac";
  TaskSpec task;
  PpoConfig ppo;
  NetConfig actor{4, 8, 0, 0.5};
  std::string optimizer = "sgd";
  EvalSection eval;
  CriticSection critic;
  ProbeSection probe;

  static RunConfig from_file(const std::filesystem::path& path);
  static RunConfig from_json(const nlohmann::json& j);

  // Fully materialized form (all defaults explicit, sorted keys).
  nlohmann::json to_json() const;

  // FNV-1a over the canonical serialization; 16 hex chars. Stable under key
  // reordering and default omission in the source file.
  std::string hash() const;

  // Deterministic run identity for metrics records: "<hash8>-s<seed>".
  std::string run_id() const;

  void validate() const;  // throws ConfigError
};

// Derived model shapes. The actor featurizes task digits only; both critics
// carry (p_extra, t_extra) vocabulary headroom so the ood ladder stays in
// range.
ModelDims actor_dims(const RunConfig& cfg);
CriticVocab critic_vocab(const RunConfig& cfg);
ModelDims gen_critic_dims(const RunConfig& cfg);
ModelDims disc_critic_dims(const RunConfig& cfg);
PpoConfig ppo_from_config(const RunConfig& cfg);

}  // namespace genac
