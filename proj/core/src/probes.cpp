#include "genac/probes.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "genac/parallel.hpp"

namespace genac {

// ----- cost model -----

namespace {

void require_positive(double v, const char* name) {
  if (!(v > 0.0))
    throw std::invalid_argument(std::string("cost_model: ") + name + " must be positive");
}

}  // namespace

double cost_model(const CostParams& p, CostMethod method) {
  require_positive(p.actor_params, "actor_params");
  require_positive(p.total_tokens, "total_tokens");
  switch (method) {
    case CostMethod::ppo:
      require_positive(p.critic_params, "critic_params");
      return 10.0 * p.actor_params * p.total_tokens + 8.0 * p.critic_params * p.total_tokens;
    case CostMethod::genac: {
      require_positive(p.critic_params, "critic_params");
      require_positive(p.avg_segment_len, "avg_segment_len");
      require_positive(p.avg_critic_len, "avg_critic_len");
      const double critic_tokens =
          p.total_tokens + (p.total_tokens / p.avg_segment_len) * p.avg_critic_len;
      return 10.0 * p.actor_params * p.total_tokens + 8.0 * p.critic_params * critic_tokens;
    }
    case CostMethod::vineppo: {
      require_positive(p.avg_segment_len, "avg_segment_len");
      require_positive(p.avg_branch_len, "avg_branch_len");
      require_positive(p.branches, "branches");
      const double rollout_tokens =
          (p.total_tokens / p.avg_segment_len) * p.avg_branch_len * p.branches;
      return 10.0 * p.actor_params * p.total_tokens + 2.0 * p.actor_params * rollout_tokens;
    }
  }
  throw std::invalid_argument("cost_model: unknown method");
}

std::vector<CostRow> cost_table(const CostParams& p) {
  const double ppo = cost_model(p, CostMethod::ppo);
  const double pt = p.actor_params * p.total_tokens;
  auto row = [&](const std::string& name, double flops) {
    return CostRow{name, flops, flops / pt, std::round(10.0 * flops / ppo) / 10.0};
  };
  return {row("PPO", ppo), row("GenAC", cost_model(p, CostMethod::genac)),
          row("VinePPO", cost_model(p, CostMethod::vineppo))};
}

double measured_flops(const TokenTally& tally, double actor_params, double critic_params) {
  return tally_flops(tally, actor_params, critic_params);
}

// ----- approximation sweep -----

namespace {

ModelDims with_capacity(ModelDims dims, int capacity) {
  dims.embed_dim = capacity;
  if (dims.hidden_dim > 0) dims.hidden_dim = capacity;
  return dims;
}

double mean_of(std::span<const double> xs) {
  double m = 0.0;
  for (const double x : xs) m += x;
  return xs.empty() ? 0.0 : m / static_cast<double>(xs.size());
}

double pop_std_of(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  const double m = mean_of(xs);
  double v = 0.0;
  for (const double x : xs) v += (x - m) * (x - m);
  return std::sqrt(v / static_cast<double>(xs.size()));
}

}  // namespace

SweepResult approx_sweep(const SeqModel& frozen_actor, const TaskSpec& spec,
                         const CriticVocab& vocab, std::span<const LabeledState> benchmark,
                         const SweepOptions& opts) {
  if (opts.n_seeds < 2) throw std::invalid_argument("approx_sweep: n_seeds must be >= 2");
  if (opts.capacities.empty()) throw std::invalid_argument("approx_sweep: capacities empty");

  // One SFT dataset per seed index, shared across capacities and grids.
  std::vector<SftDataset> sft_data(static_cast<std::size_t>(opts.n_seeds));
  const bool wants_gen =
      std::find(opts.families.begin(), opts.families.end(), "gen") != opts.families.end();
  if (wants_gen) {
    parallel_for(opts.n_seeds, opts.workers, [&](int s) {
      SftDatasetConfig dc = opts.sft_data;
      dc.seed = split_mix64(opts.seed + 0x5F7D1 + static_cast<std::uint64_t>(s));
      sft_data[static_cast<std::size_t>(s)] = build_sft_dataset(frozen_actor, spec, vocab, dc);
    });
  }

  struct CellSpec {
    std::string family;
    int capacity;
    int seed_index;
    double lr;
  };
  std::vector<CellSpec> specs;
  for (const auto& family : opts.families) {
    for (const int cap : opts.capacities) {
      const std::vector<double> lrs =
          family == "disc" ? opts.disc_lr_grid : std::vector<double>{opts.gen_lr};
      for (const double lr : lrs)
        for (int s = 0; s < opts.n_seeds; ++s) specs.push_back({family, cap, s, lr});
    }
  }

  const RngStream root(opts.seed);
  std::vector<SweepCell> cells(specs.size());
  parallel_for(static_cast<int>(specs.size()), opts.workers, [&](int i) {
    const CellSpec& cs = specs[static_cast<std::size_t>(i)];
    // Cell streams keyed by content, not position, so grid edits do not
    // silently reseed unrelated cells.
    const std::uint64_t salt =
        split_mix64((cs.family == "disc" ? 0xD15Cull : 0x6E4ull) +
                    static_cast<std::uint64_t>(cs.capacity) * 1000003ull +
                    static_cast<std::uint64_t>(cs.seed_index) * 7919ull +
                    static_cast<std::uint64_t>(cs.lr * 1e9));
    RngStream init_rng = root.child(salt).child(stream::kInit);

    SweepCell cell{cs.family, cs.capacity, cs.seed_index, cs.lr, 0.0, 0.0};
    PretrainConfig pc = opts.pretrain;
    pc.lr = cs.lr;
    pc.seed = root.child(salt).child(stream::kPretrain).seed();
    pc.workers = 1;  // cell-level parallelism only

    if (cs.family == "disc") {
      DiscriminativeCritic critic = DiscriminativeCritic::random_init(
          with_capacity(opts.disc_dims, cs.capacity), true, opts.disc_init_scale, init_rng);
      const DiscPretrainResult r =
          pretrain_disc_critic(frozen_actor, spec, std::move(critic), benchmark, pc);
      cell.mse = r.final_val_mse;
    } else if (cs.family == "gen") {
      SeqModel model = SeqModel::random_init(with_capacity(opts.gen_dims, cs.capacity),
                                             opts.gen_init_scale, init_rng);
      SftFitConfig sft = opts.sft;
      sft.seed = root.child(salt).child(stream::kSft).seed();
      sft_fit(model, sft_data[static_cast<std::size_t>(cs.seed_index)].examples, sft);
      GenCriticBundle bundle{std::move(model),
                             vocab,
                             IccHint{0.0, opts.sft_data.icc_momentum},
                             opts.sft_data.actor_tag,
                             opts.sft_data.icc_enabled,
                             opts.max_trace_len};
      const GenPretrainResult r = pretrain_gen_critic(frozen_actor, spec, std::move(bundle),
                                                      opts.segment_rule, benchmark, pc);
      cell.mse = r.final_val_mse;
      cell.parse_failure = r.final_parse_failure;
    } else {
      throw std::invalid_argument("approx_sweep: unknown family " + cs.family);
    }
    cells[static_cast<std::size_t>(i)] = cell;
  });

  // Aggregate: per (family, capacity) pick the grid lr with the best mean.
  SweepResult result;
  result.cells = cells;
  for (const auto& family : opts.families) {
    for (const int cap : opts.capacities) {
      const std::vector<double> lrs =
          family == "disc" ? opts.disc_lr_grid : std::vector<double>{opts.gen_lr};
      SweepRow best;
      bool have = false;
      for (const double lr : lrs) {
        std::vector<double> per_seed;
        for (const auto& c : cells)
          if (c.family == family && c.capacity == cap && c.lr == lr) per_seed.push_back(c.mse);
        SweepRow row{family, cap, lr, mean_of(per_seed), pop_std_of(per_seed), per_seed};
        if (!have || row.mean_mse < best.mean_mse) {
          best = std::move(row);
          have = true;
        }
      }
      if (have) result.rows.push_back(std::move(best));
    }
  }
  return result;
}

// ----- ranking probe -----

ValueScorer oracle_scorer(const SeqModel& frozen_actor, const TaskSpec& spec,
                          const LabelerConfig& labeler) {
  return [&frozen_actor, spec, labeler](const MdpState& state, RngStream& rng) {
    return label_state(state, frozen_actor, spec, labeler, rng).value;
  };
}

ValueScorer random_scorer() {
  return [](const MdpState&, RngStream& rng) { return rng.uniform(); };
}

ValueScorer disc_scorer(const DiscriminativeCritic& critic) {
  return [&critic](const MdpState& state, RngStream&) { return critic.predict(state); };
}

ValueScorer gen_scorer(const GenCriticBundle& critic, DecodeMode mode) {
  return [&critic, mode](const MdpState& state, RngStream& rng) {
    const CriticTrace trace = critic.score(state, mode, &rng);
    return trace.parsed_value.value_or(0.5);
  };
}

std::vector<RankRow> ranking_probe(const ValueScorer& scorer, const SeqModel& frozen_actor,
                                   const TaskSpec& spec, const RankProbeOptions& opts) {
  spec.validate();
  if (opts.n_prompts < 1) throw std::invalid_argument("ranking_probe: n_prompts must be >= 1");

  const RngStream root(opts.seed);
  std::vector<RankRow> rows;
  for (std::size_t pi = 0; pi < opts.pool_sizes.size(); ++pi) {
    const int pool = opts.pool_sizes[pi];
    if (pool < 2) throw std::invalid_argument("ranking_probe: pool sizes must be >= 2");
    const RngStream pool_root = root.child(pi);

    std::vector<char> hit(static_cast<std::size_t>(opts.n_prompts), 0);
    std::vector<char> critic_tie(static_cast<std::size_t>(opts.n_prompts), 0);
    std::vector<char> oracle_tie(static_cast<std::size_t>(opts.n_prompts), 0);

    parallel_for(opts.n_prompts, opts.workers, [&](int i) {
      const RngStream prompt_root = pool_root.child(static_cast<std::uint64_t>(i));
      RngStream prng = prompt_root.child(0);
      const std::vector<int> prompt = sample_prompt(spec, prng);
      const int seg_len = std::min(opts.candidate_len, spec.horizon());

      int oracle_best = 0, critic_best = 0;
      double oracle_best_v = 0.0, critic_best_v = 0.0;
      bool o_tied = false, c_tied = false;
      for (int g = 0; g < pool; ++g) {
        RngStream crng = prompt_root.child(1).child(static_cast<std::uint64_t>(g));
        MdpState state;
        state.prompt = prompt;
        std::vector<int> ctx = prompt;
        for (int t = 0; t < seg_len; ++t) {
          const int a = frozen_actor.sample(ctx, crng);
          state.partial_response.push_back(a);
          ctx.push_back(a);
        }
        RngStream label_rng = prompt_root.child(2).child(static_cast<std::uint64_t>(g));
        const double truth = label_state(state, frozen_actor, spec, opts.labeler, label_rng).value;
        RngStream score_rng = prompt_root.child(3).child(static_cast<std::uint64_t>(g));
        const double score = scorer(state, score_rng);

        if (g == 0) {
          oracle_best_v = truth;
          critic_best_v = score;
        } else {
          if (truth == oracle_best_v) o_tied = true;
          if (truth > oracle_best_v) {
            oracle_best_v = truth;
            oracle_best = g;
            o_tied = false;
          }
          if (score == critic_best_v) c_tied = true;
          if (score > critic_best_v) {
            critic_best_v = score;
            critic_best = g;
            c_tied = false;
          }
        }
      }
      hit[static_cast<std::size_t>(i)] = critic_best == oracle_best ? 1 : 0;
      critic_tie[static_cast<std::size_t>(i)] = c_tied ? 1 : 0;
      oracle_tie[static_cast<std::size_t>(i)] = o_tied ? 1 : 0;
    });

    RankRow row;
    row.pool_size = pool;
    row.n_prompts = opts.n_prompts;
    for (int i = 0; i < opts.n_prompts; ++i) {
      row.top1_accuracy += hit[static_cast<std::size_t>(i)];
      row.critic_tie_rate += critic_tie[static_cast<std::size_t>(i)];
      row.oracle_tie_rate += oracle_tie[static_cast<std::size_t>(i)];
    }
    row.top1_accuracy /= opts.n_prompts;
    row.critic_tie_rate /= opts.n_prompts;
    row.oracle_tie_rate /= opts.n_prompts;
    rows.push_back(row);
  }
  return rows;
}

// ----- OOD ladder -----

std::vector<OodLevel> shift_ladder(const TaskSpec& base) {
  std::vector<OodLevel> ladder;
  ladder.push_back({"none", base});

  TaskSpec mild = base;
  // Skew mass toward digit 0, keeping the support.
  mild.digit_dist.assign(static_cast<std::size_t>(base.modulus), 0.5 / (base.modulus - 1));
  mild.digit_dist[0] = 0.5;
  mild.seed = split_mix64(base.seed + 1);
  ladder.push_back({"mild", mild});

  TaskSpec moderate = base;
  moderate.modulus = base.modulus + 2;
  moderate.digit_dist.clear();
  moderate.seed = split_mix64(base.seed + 2);
  ladder.push_back({"moderate", moderate});

  TaskSpec high = base;
  high.modulus = base.modulus + 2;
  high.prompt_len = base.prompt_len + 4;
  high.digit_dist.clear();
  high.seed = split_mix64(base.seed + 3);
  ladder.push_back({"high", high});
  return ladder;
}

std::vector<OodRow> ood_probe(const DiscriminativeCritic& disc, const GenCriticBundle& gen,
                              const SeqModel& base_frozen_actor, const TaskSpec& base,
                              const OodOptions& opts) {
  const std::vector<OodLevel> ladder = shift_ladder(base);
  const RngStream root(opts.seed);

  std::vector<OodRow> rows;
  for (std::size_t li = 0; li < ladder.size(); ++li) {
    const OodLevel& level = ladder[li];
    const bool same_dims = level.spec.modulus == base.modulus &&
                           level.spec.prompt_len == base.prompt_len;

    // The base initial actor serves every level it can featurize; levels with
    // a larger vocabulary get a fresh seeded initial actor of the family.
    SeqModel shifted_actor = [&] {
      if (same_dims) return base_frozen_actor;
      ModelDims dims = opts.actor_dims;
      dims.vocab_size = level.spec.modulus;
      dims.max_positions = level.spec.prompt_len + level.spec.horizon() + 1;
      RngStream init_rng = root.child(li).child(stream::kInit);
      return SeqModel::random_init(dims, opts.actor_init_scale, init_rng);
    }();

    const std::vector<LabeledState> bench = build_value_benchmark(
        shifted_actor, level.spec, opts.n_states, opts.labeler, opts.segment_rule,
        root.child(li).child(stream::kBenchmark).seed(), opts.workers);

    OodRow row;
    row.level = level.name;
    row.n_states = opts.n_states;
    row.disc_mse = benchmark_mse_disc(disc, bench);
    const GenBenchmarkResult g = benchmark_mse_gen(gen, bench, DecodeMode::greedy, 0, opts.workers);
    row.gen_mse = g.mse;
    row.gen_parse_failure = g.parse_failure_rate;
    row.reduction = row.disc_mse > 0.0 ? (row.disc_mse - row.gen_mse) / row.disc_mse : 0.0;
    rows.push_back(std::move(row));
  }
  return rows;
}

// ----- ablation grid -----

std::vector<AblationCell> ablation_grid(const SeqModel& frozen_actor, const TaskSpec& spec,
                                        const CriticVocab& vocab,
                                        std::span<const LabeledState> benchmark,
                                        const AblationOptions& opts) {
  std::vector<AblationCell> cells;
  const RngStream root(opts.seed);

  for (const bool icc : {true, false}) {
    SftDatasetConfig dc = opts.sft_data;
    dc.icc_enabled = icc;
    dc.seed = root.child(stream::kSft).seed();  // same rollouts for both arms
    const SftDataset data = build_sft_dataset(frozen_actor, spec, vocab, dc);

    for (const std::string stage : {"base", "sft", "rl"}) {
      // Shared initialization across all six arms.
      RngStream init_rng = root.child(stream::kInit);
      SeqModel model = SeqModel::random_init(opts.critic_dims, opts.init_scale, init_rng);
      GenCriticBundle bundle{std::move(model),
                             vocab,
                             IccHint{0.0, dc.icc_momentum},
                             dc.actor_tag,
                             icc,
                             opts.max_trace_len};
      bundle.hint = data.final_hint;

      if (stage != "base") {
        SftFitConfig sft = opts.sft;
        sft.seed = root.child(stream::kSft).child(1).seed();
        sft_fit(bundle.model, data.examples, sft);
      }
      if (stage == "rl") {
        PretrainConfig pc = opts.rl;
        pc.seed = root.child(stream::kPretrain).seed();
        GenPretrainResult r = pretrain_gen_critic(frozen_actor, spec, std::move(bundle),
                                                  opts.segment_rule, benchmark, pc);
        cells.push_back({stage, icc, r.final_val_mse, r.final_parse_failure});
        continue;
      }
      const GenBenchmarkResult r =
          benchmark_mse_gen(bundle, benchmark, DecodeMode::greedy, 0, opts.workers);
      cells.push_back({stage, icc, r.mse, r.parse_failure_rate});
    }
  }
  return cells;
}

// ----- table emission -----

namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

}  // namespace

void write_cost_csv(const std::filesystem::path& path, std::span<const CostRow> rows) {
  auto out = open_csv(path);
  out << "method,flops,pt_units,ratio_vs_ppo\n";
  for (const auto& r : rows)
    out << r.method << ',' << r.flops << ',' << r.pt_units << ',' << r.ratio << '\n';
}

void write_sweep_csv(const std::filesystem::path& path, const SweepResult& result) {
  auto out = open_csv(path);
  out << "family,capacity,lr,mean_mse,std_mse,n_seeds\n";
  for (const auto& r : result.rows)
    out << r.family << ',' << r.capacity << ',' << r.lr << ',' << r.mean_mse << ','
        << r.std_mse << ',' << r.per_seed_mse.size() << '\n';

  std::filesystem::path cells = path;
  cells.replace_extension(".cells.csv");
  auto out2 = open_csv(cells);
  out2 << "family,capacity,seed_index,lr,mse,parse_failure\n";
  for (const auto& c : result.cells)
    out2 << c.family << ',' << c.capacity << ',' << c.seed_index << ',' << c.lr << ','
         << c.mse << ',' << c.parse_failure << '\n';
}

void write_rank_csv(const std::filesystem::path& path, std::span<const RankRow> rows) {
  auto out = open_csv(path);
  out << "pool_size,top1_accuracy,critic_tie_rate,oracle_tie_rate,n_prompts\n";
  for (const auto& r : rows)
    out << r.pool_size << ',' << r.top1_accuracy << ',' << r.critic_tie_rate << ','
        << r.oracle_tie_rate << ',' << r.n_prompts << '\n';
}

void write_ood_csv(const std::filesystem::path& path, std::span<const OodRow> rows) {
  auto out = open_csv(path);
  out << "level,disc_mse,gen_mse,gen_parse_failure,reduction,n_states\n";
  for (const auto& r : rows)
    out << r.level << ',' << r.disc_mse << ',' << r.gen_mse << ',' << r.gen_parse_failure << ','
        << r.reduction << ',' << r.n_states << '\n';
}

void write_ablation_csv(const std::filesystem::path& path, std::span<const AblationCell> rows) {
  auto out = open_csv(path);
  out << "stage,icc,mse,parse_failure\n";
  for (const auto& r : rows)
    out << r.stage << ',' << (r.icc ? "with" : "without") << ',' << r.mse << ','
        << r.parse_failure << '\n';
}

nlohmann::json cost_to_json(std::span<const CostRow> rows) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : rows)
    j.push_back({{"method", r.method},
                 {"flops", r.flops},
                 {"pt_units", r.pt_units},
                 {"ratio_vs_ppo", r.ratio}});
  return j;
}

nlohmann::json sweep_to_json(const SweepResult& result) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : result.rows)
    rows.push_back({{"family", r.family},
                    {"capacity", r.capacity},
                    {"lr", r.lr},
                    {"mean_mse", r.mean_mse},
                    {"std_mse", r.std_mse},
                    {"per_seed_mse", r.per_seed_mse}});
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : result.cells)
    cells.push_back({{"family", c.family},
                     {"capacity", c.capacity},
                     {"seed_index", c.seed_index},
                     {"lr", c.lr},
                     {"mse", c.mse},
                     {"parse_failure", c.parse_failure}});
  return {{"rows", rows}, {"cells", cells}};
}

nlohmann::json rank_to_json(std::span<const RankRow> rows) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : rows)
    j.push_back({{"pool_size", r.pool_size},
                 {"top1_accuracy", r.top1_accuracy},
                 {"critic_tie_rate", r.critic_tie_rate},
                 {"oracle_tie_rate", r.oracle_tie_rate},
                 {"n_prompts", r.n_prompts}});
  return j;
}

nlohmann::json ood_to_json(std::span<const OodRow> rows) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : rows)
    j.push_back({{"level", r.level},
                 {"disc_mse", r.disc_mse},
                 {"gen_mse", r.gen_mse},
                 {"gen_parse_failure", r.gen_parse_failure},
                 {"reduction", r.reduction},
                 {"n_states", r.n_states}});
  return j;
}

nlohmann::json ablation_to_json(std::span<const AblationCell> rows) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : rows)
    j.push_back({{"stage", r.stage},
                 {"icc", r.icc},
                 {"mse", r.mse},
                 {"parse_failure", r.parse_failure}});
  return j;
}

}  // namespace genac
