#include "genac/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "genac/parallel.hpp"

namespace genac {

void PpoConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("PpoConfig: " + msg); };
  if (clip_eps <= 0.0) fail("clip_eps must be > 0");
  if (gamma < 0.0 || gamma > 1.0) fail("gamma must be in [0,1]");
  if (lambda < 0.0 || lambda > 1.0) fail("lambda must be in [0,1]");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (minibatch_size < 1) fail("minibatch_size must be >= 1");
  if (group_size < 2) fail("group_size must be >= 2");
  if (epochs < 1) fail("epochs must be >= 1");
  if (actor_lr <= 0.0) fail("actor_lr must be > 0");
  if (critic_lr <= 0.0) fail("critic_lr must be > 0");
  if (max_iters < 1) fail("max_iters must be >= 1");
}

TokenTally& TokenTally::operator+=(const TokenTally& o) {
  actor_generated += o.actor_generated;
  actor_forward += o.actor_forward;
  actor_trained += o.actor_trained;
  disc_forward += o.disc_forward;
  disc_trained += o.disc_trained;
  gen_critic_processed += o.gen_critic_processed;
  gen_critic_trained += o.gen_critic_trained;
  return *this;
}

double tally_flops(const TokenTally& t, double actor_params, double critic_params) {
  return 2.0 * actor_params * t.actor_generated + 2.0 * actor_params * t.actor_forward +
         6.0 * actor_params * t.actor_trained + 2.0 * critic_params * t.disc_forward +
         6.0 * critic_params * t.disc_trained + 2.0 * critic_params * t.gen_critic_processed +
         6.0 * critic_params * t.gen_critic_trained;
}

double ppo_actor_loss(const SeqModel& actor, std::span<const Trajectory> trajectories,
                      std::span<const AdvantageVector> advantages, double clip_eps,
                      std::span<double> grad_out) {
  if (trajectories.size() != advantages.size())
    throw std::invalid_argument("ppo_actor_loss: one advantage vector per trajectory required");

  double loss = 0.0;
  std::vector<int> ctx;
  for (std::size_t j = 0; j < trajectories.size(); ++j) {
    const Trajectory& traj = trajectories[j];
    if (traj.old_logprobs.size() != traj.response.size())
      throw std::invalid_argument("ppo_actor_loss: trajectory is missing old log-probs");
    if (advantages[j].size() != traj.response.size())
      throw std::invalid_argument("ppo_actor_loss: advantage length mismatch");

    ctx = traj.prompt;
    for (std::size_t t = 0; t < traj.response.size(); ++t) {
      const int action = traj.response[t];
      const double adv = advantages[j][t];
      const double lp = actor.logprob(ctx, action);
      const double ratio = std::exp(lp - traj.old_logprobs[t]);
      const double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
      const double unclipped_term = ratio * adv;
      const double clipped_term = clipped * adv;
      loss -= std::min(unclipped_term, clipped_term);
      // Gradient flows only through the unclipped branch when it is active;
      // the clipped branch is constant in theta at the points it wins.
      if (unclipped_term <= clipped_term && adv != 0.0)
        actor.accumulate_grad_logprob(ctx, action, -adv * ratio, grad_out);
      ctx.push_back(action);
    }
  }
  return loss;
}

double evaluate_actor(const TaskSpec& spec, const SeqModel& actor, int prompts, int samples,
                      std::uint64_t seed, int workers) {
  const RngStream prompt_root = RngStream(spec.seed).child(stream::kEvalPrompt);
  const RngStream sample_root = RngStream(seed).child(stream::kEvalSample);
  std::vector<double> success(static_cast<std::size_t>(prompts), 0.0);
  parallel_for(prompts, workers, [&](int i) {
    RngStream prng = prompt_root.child(static_cast<std::uint64_t>(i));
    const std::vector<int> prompt = sample_prompt(spec, prng);
    RngStream arng = sample_root.child(static_cast<std::uint64_t>(i));
    double hits = 0.0;
    for (int s = 0; s < samples; ++s) {
      const Trajectory traj = sample_response(spec, actor, prompt, arng);
      hits += traj.reward;
    }
    success[static_cast<std::size_t>(i)] = hits / samples;
  });
  double total = 0.0;
  for (const double s : success) total += s;
  return total / prompts;
}

namespace {

// Shared scaffolding for the four trainers.

std::vector<Trajectory> sample_batch(const TaskSpec& spec, const SeqModel& actor, int iteration,
                                     int n_prompts, int group, std::uint64_t run_seed,
                                     int workers) {
  const RngStream prompt_root =
      RngStream(spec.seed).child(stream::kTrainPrompt).child(static_cast<std::uint64_t>(iteration));
  const RngStream action_root =
      RngStream(run_seed).child(stream::kActorSample).child(static_cast<std::uint64_t>(iteration));

  std::vector<Trajectory> batch(static_cast<std::size_t>(n_prompts * group));
  // Prompts are per group; each group member has its own action stream.
  std::vector<std::vector<int>> prompts(static_cast<std::size_t>(n_prompts));
  parallel_for(n_prompts, workers, [&](int i) {
    RngStream prng = prompt_root.child(static_cast<std::uint64_t>(i));
    prompts[static_cast<std::size_t>(i)] = sample_prompt(spec, prng);
  });
  parallel_for(n_prompts * group, workers, [&](int idx) {
    const int i = idx / group, g = idx % group;
    RngStream arng =
        action_root.child(static_cast<std::uint64_t>(i)).child(static_cast<std::uint64_t>(g));
    batch[static_cast<std::size_t>(idx)] =
        sample_response(spec, actor, prompts[static_cast<std::size_t>(i)], arng);
  });
  return batch;
}

double mean_reward(std::span<const Trajectory> batch) {
  double total = 0.0;
  for (const auto& t : batch) total += t.reward;
  return batch.empty() ? 0.0 : total / static_cast<double>(batch.size());
}

std::int64_t batch_tokens(std::span<const Trajectory> batch) {
  std::int64_t n = 0;
  for (const auto& t : batch) n += static_cast<std::int64_t>(t.response.size());
  return n;
}

bool eval_iteration(const EvalOptions& eval, int iteration, int max_iters) {
  if (eval.prompts <= 0 || eval.samples <= 0) return false;
  if (iteration == max_iters - 1) return true;
  return eval.every > 0 && (iteration + 1) % eval.every == 0;
}

// One PPO pass over the batch in minibatches of whole trajectories; gradient
// steps use the per-token mean so the learning rate is batch-size free.
double ppo_epoch(SeqModel& actor, Optimizer& opt, std::span<const Trajectory> batch,
                 std::span<const AdvantageVector> advantages, double clip_eps, int minibatch) {
  const int n = static_cast<int>(batch.size());
  GradientVector grad(static_cast<std::size_t>(actor.param_count()));
  double loss_total = 0.0;
  for (int start = 0; start < n; start += minibatch) {
    const int end = std::min(n, start + minibatch);
    std::fill(grad.begin(), grad.end(), 0.0);
    std::int64_t tokens = 0;
    for (int j = start; j < end; ++j)
      tokens += static_cast<std::int64_t>(batch[static_cast<std::size_t>(j)].response.size());
    loss_total += ppo_actor_loss(
        actor, batch.subspan(static_cast<std::size_t>(start), static_cast<std::size_t>(end - start)),
        advantages.subspan(static_cast<std::size_t>(start), static_cast<std::size_t>(end - start)),
        clip_eps, grad);
    if (tokens > 0) {
      for (double& g : grad) g /= static_cast<double>(tokens);
      opt.step(actor.mutable_params(), grad);
    }
  }
  return loss_total;
}

enum class GroupEstimator { grpo, rloo };

TrainResult run_group_trainer(const TaskSpec& spec, const PpoConfig& ppo,
                              const TrainerOptions& opts, GroupEstimator estimator) {
  spec.validate();
  ppo.validate();
  RngStream init_rng = RngStream(ppo.seed).child(stream::kInit);
  SeqModel actor = SeqModel::random_init(opts.actor_dims, opts.actor_init_scale, init_rng);
  Optimizer opt(Optimizer::parse_kind(opts.optimizer), ppo.actor_lr,
                static_cast<std::size_t>(actor.param_count()));

  TrainResult result{{}, actor, std::nullopt, std::nullopt, {}};
  const double pa = static_cast<double>(actor.param_count());

  for (int iter = 0; iter < ppo.max_iters; ++iter) {
    const std::vector<Trajectory> batch =
        sample_batch(spec, actor, iter, ppo.batch_size, ppo.group_size, ppo.seed, opts.workers);

    std::vector<AdvantageVector> advantages(batch.size());
    std::vector<double> group(static_cast<std::size_t>(ppo.group_size));
    for (int i = 0; i < ppo.batch_size; ++i) {
      for (int g = 0; g < ppo.group_size; ++g)
        group[static_cast<std::size_t>(g)] = batch[static_cast<std::size_t>(i * ppo.group_size + g)].reward;
      const std::vector<double> adv =
          estimator == GroupEstimator::grpo ? grpo_advantages(group) : rloo_advantages(group);
      for (int g = 0; g < ppo.group_size; ++g) {
        const auto& traj = batch[static_cast<std::size_t>(i * ppo.group_size + g)];
        advantages[static_cast<std::size_t>(i * ppo.group_size + g)]
            .assign(traj.response.size(), adv[static_cast<std::size_t>(g)]);
      }
    }

    double loss = 0.0;
    for (int e = 0; e < ppo.epochs; ++e)
      loss += ppo_epoch(actor, opt, batch, advantages, ppo.clip_eps, ppo.minibatch_size);

    const std::int64_t tokens = batch_tokens(batch);
    result.tally.actor_generated += static_cast<double>(tokens);
    result.tally.actor_forward += static_cast<double>(tokens);
    result.tally.actor_trained += static_cast<double>(tokens) * ppo.epochs;

    IterationMetrics m;
    m.iteration = iter;
    m.mean_reward = mean_reward(batch);
    m.actor_loss = tokens > 0 ? loss / static_cast<double>(tokens * ppo.epochs) : 0.0;
    m.flops = tally_flops(result.tally, pa, 0.0);
    if (eval_iteration(opts.eval, iter, ppo.max_iters))
      m.eval_success =
          evaluate_actor(spec, actor, opts.eval.prompts, opts.eval.samples, ppo.seed, opts.workers);
    if (opts.hooks.on_iteration) opts.hooks.on_iteration(m);
    result.metrics.push_back(m);
  }

  result.actor = std::move(actor);
  return result;
}

}  // namespace

TrainResult run_grpo(const TaskSpec& spec, const PpoConfig& ppo, const TrainerOptions& opts) {
  return run_group_trainer(spec, ppo, opts, GroupEstimator::grpo);
}

TrainResult run_rloo(const TaskSpec& spec, const PpoConfig& ppo, const TrainerOptions& opts) {
  return run_group_trainer(spec, ppo, opts, GroupEstimator::rloo);
}

TrainResult run_vcppo(const TaskSpec& spec, const PpoConfig& ppo, const TrainerOptions& opts,
                      const VcppoOptions& vc) {
  spec.validate();
  ppo.validate();
  RngStream init_rng = RngStream(ppo.seed).child(stream::kInit);
  SeqModel actor = SeqModel::random_init(opts.actor_dims, opts.actor_init_scale, init_rng);
  DiscriminativeCritic critic =
      vc.pretrained ? *vc.pretrained
                    : DiscriminativeCritic::random_init(vc.critic_dims, vc.sigmoid_head,
                                                        vc.critic_init_scale, init_rng);
  Optimizer actor_opt(Optimizer::parse_kind(opts.optimizer), ppo.actor_lr,
                      static_cast<std::size_t>(actor.param_count()));
  Optimizer critic_opt(Optimizer::parse_kind(opts.optimizer), ppo.critic_lr,
                       static_cast<std::size_t>(critic.param_count()));

  TrainResult result{{}, actor, std::nullopt, std::nullopt, {}};
  const double pa = static_cast<double>(actor.param_count());
  const double pc = static_cast<double>(critic.param_count());
  GradientVector actor_grad(static_cast<std::size_t>(actor.param_count()));
  GradientVector critic_grad(static_cast<std::size_t>(critic.param_count()));

  for (int iter = 0; iter < ppo.max_iters; ++iter) {
    const std::vector<Trajectory> batch =
        sample_batch(spec, actor, iter, ppo.batch_size, 1, ppo.seed, opts.workers);
    const std::int64_t tokens = batch_tokens(batch);
    double loss = 0.0;
    double critic_mse = 0.0;
    std::int64_t critic_terms = 0;

    for (int e = 0; e < ppo.epochs; ++e) {
      const int n = static_cast<int>(batch.size());
      for (int start = 0; start < n; start += ppo.minibatch_size) {
        const int end = std::min(n, start + ppo.minibatch_size);

        // Value pass, advantages, and lambda-return targets per trajectory.
        std::vector<AdvantageVector> advantages(static_cast<std::size_t>(end - start));
        std::vector<std::vector<double>> returns(static_cast<std::size_t>(end - start));
        std::int64_t mb_tokens = 0;
        for (int j = start; j < end; ++j) {
          const Trajectory& traj = batch[static_cast<std::size_t>(j)];
          const int horizon = static_cast<int>(traj.response.size());
          std::vector<double> rewards(static_cast<std::size_t>(horizon), 0.0);
          rewards.back() = traj.reward;
          std::vector<double> values(static_cast<std::size_t>(horizon) + 1, 0.0);
          std::vector<int> ctx = traj.prompt;
          for (int t = 0; t < horizon; ++t) {
            values[static_cast<std::size_t>(t)] = critic.predict(ctx);
            ctx.push_back(traj.response[static_cast<std::size_t>(t)]);
          }
          values.back() = 0.0;  // terminal bootstrap
          AdvantageVector adv = gae(rewards, values, ppo.gamma, ppo.lambda);
          auto& ret = returns[static_cast<std::size_t>(j - start)];
          ret.resize(static_cast<std::size_t>(horizon));
          for (int t = 0; t < horizon; ++t)
            ret[static_cast<std::size_t>(t)] =
                adv[static_cast<std::size_t>(t)] + values[static_cast<std::size_t>(t)];
          advantages[static_cast<std::size_t>(j - start)] = std::move(adv);
          mb_tokens += horizon;
        }

        // Actor step.
        std::fill(actor_grad.begin(), actor_grad.end(), 0.0);
        loss += ppo_actor_loss(actor,
                               std::span<const Trajectory>(batch).subspan(
                                   static_cast<std::size_t>(start), static_cast<std::size_t>(end - start)),
                               advantages, ppo.clip_eps, actor_grad);
        if (mb_tokens > 0) {
          for (double& g : actor_grad) g /= static_cast<double>(mb_tokens);
          actor_opt.step(actor.mutable_params(), actor_grad);
        }

        // Critic step: MSE toward the lambda returns.
        std::fill(critic_grad.begin(), critic_grad.end(), 0.0);
        for (int j = start; j < end; ++j) {
          const Trajectory& traj = batch[static_cast<std::size_t>(j)];
          std::vector<int> ctx = traj.prompt;
          for (std::size_t t = 0; t < traj.response.size(); ++t) {
            const double target = returns[static_cast<std::size_t>(j - start)][t];
            const double v = critic.predict(ctx);
            critic_mse += (v - target) * (v - target);
            ++critic_terms;
            critic.accumulate_mse_grad(ctx, target, 1.0, critic_grad);
            ctx.push_back(traj.response[t]);
          }
        }
        if (mb_tokens > 0) {
          for (double& g : critic_grad) g /= static_cast<double>(mb_tokens);
          critic_opt.step(critic.mutable_params(), critic_grad);
        }
      }
    }

    result.tally.actor_generated += static_cast<double>(tokens);
    result.tally.actor_forward += static_cast<double>(tokens);
    result.tally.actor_trained += static_cast<double>(tokens) * ppo.epochs;
    result.tally.disc_forward += static_cast<double>(tokens) * ppo.epochs;
    result.tally.disc_trained += static_cast<double>(tokens) * ppo.epochs;

    IterationMetrics m;
    m.iteration = iter;
    m.mean_reward = mean_reward(batch);
    m.actor_loss = tokens > 0 ? loss / static_cast<double>(tokens * ppo.epochs) : 0.0;
    m.critic_loss = critic_terms > 0 ? critic_mse / static_cast<double>(critic_terms) : 0.0;
    m.flops = tally_flops(result.tally, pa, pc);
    if (eval_iteration(opts.eval, iter, ppo.max_iters))
      m.eval_success =
          evaluate_actor(spec, actor, opts.eval.prompts, opts.eval.samples, ppo.seed, opts.workers);
    if (opts.hooks.on_iteration) opts.hooks.on_iteration(m);
    result.metrics.push_back(m);
  }

  result.actor = std::move(actor);
  result.disc_critic = std::move(critic);
  return result;
}

namespace {

struct ScoredTrajectory {
  Segmentation seg;
  std::vector<CriticEpisode> episodes;  // one per segment
  std::vector<double> token_values;
  AdvantageVector advantages;
  double gen_tokens = 0.0;  // trace tokens generated
};

// Score one trajectory's segments with sampled critic traces per Algorithm 1:
// context over segments 1..k, value broadcast to segment k's tokens.
ScoredTrajectory score_trajectory(const Trajectory& traj,
                                  const GenCriticBundle& critic, const SegmentRule& rule,
                                  double gamma, double lambda, const RngStream& trace_root) {
  ScoredTrajectory sc;
  sc.seg = segment(traj.response, rule);
  const std::vector<int> bounds = sc.seg.boundaries();

  std::vector<double> seg_values(static_cast<std::size_t>(sc.seg.count()));
  sc.episodes.reserve(static_cast<std::size_t>(sc.seg.count()));
  MdpState state;
  state.prompt = traj.prompt;
  for (int k = 0; k < sc.seg.count(); ++k) {
    state.partial_response.assign(traj.response.begin(),
                                  traj.response.begin() + bounds[static_cast<std::size_t>(k)]);
    const CriticContext ctx =
        build_context(state, critic.hint, critic.actor_tag, critic.icc_enabled, critic.vocab);
    RngStream rng = trace_root.child(static_cast<std::uint64_t>(k));
    CriticTrace trace =
        gen_trace(critic.model, ctx, critic.max_trace_len, DecodeMode::sample, &rng, critic.vocab);
    sc.gen_tokens += static_cast<double>(trace.tokens.size());
    // Parse failure: the actor sees the running hint as a neutral value; the
    // critic still earns exactly 0.
    seg_values[static_cast<std::size_t>(k)] =
        trace.parsed_value ? *trace.parsed_value : critic.hint.value;
    const double rv = critic_reward(trace, traj.reward);
    sc.episodes.push_back(CriticEpisode{ctx, std::move(trace), rv});
  }

  sc.token_values = broadcast(seg_values, sc.seg.lengths);
  std::vector<double> rewards(traj.response.size(), 0.0);
  rewards.back() = traj.reward;
  std::vector<double> values = sc.token_values;
  values.push_back(0.0);  // terminal bootstrap
  sc.advantages = gae(rewards, values, gamma, lambda);
  return sc;
}

}  // namespace

TrainResult run_genac(const TaskSpec& spec, const PpoConfig& ppo, const TrainerOptions& opts,
                      GenCriticBundle critic, const GenacOptions& gen) {
  spec.validate();
  ppo.validate();
  RngStream init_rng = RngStream(ppo.seed).child(stream::kInit);
  SeqModel actor = SeqModel::random_init(opts.actor_dims, opts.actor_init_scale, init_rng);
  Optimizer actor_opt(Optimizer::parse_kind(opts.optimizer), ppo.actor_lr,
                      static_cast<std::size_t>(actor.param_count()));
  Optimizer critic_opt(Optimizer::parse_kind(opts.optimizer), ppo.critic_lr,
                       static_cast<std::size_t>(critic.model.param_count()));

  critic.hint.value = 0.0;  // joint training restarts the running average

  TrainResult result{{}, actor, std::nullopt, std::nullopt, {}};
  const double pa = static_cast<double>(actor.param_count());
  const double pc = static_cast<double>(critic.model.param_count());
  GradientVector actor_grad(static_cast<std::size_t>(actor.param_count()));
  GradientVector critic_grad(static_cast<std::size_t>(critic.model.param_count()));

  for (int iter = 0; iter < ppo.max_iters; ++iter) {
    const std::vector<Trajectory> batch =
        sample_batch(spec, actor, iter, ppo.batch_size, 1, ppo.seed, opts.workers);

    // Hint updates happen in sampling order, before any scoring.
    for (const auto& traj : batch) critic.hint = update_hint(critic.hint, traj.reward);

    const RngStream trace_root = RngStream(ppo.seed)
                                     .child(stream::kCriticTrace)
                                     .child(static_cast<std::uint64_t>(iter));

    double actor_loss = 0.0;
    double rv_total = 0.0;
    std::int64_t episode_count = 0;
    std::int64_t parse_failures = 0;
    const std::int64_t tokens = batch_tokens(batch);

    const int n = static_cast<int>(batch.size());
    for (int start = 0; start < n; start += ppo.minibatch_size) {
      const int end = std::min(n, start + ppo.minibatch_size);
      std::vector<ScoredTrajectory> scored(static_cast<std::size_t>(end - start));
      parallel_for(end - start, opts.workers, [&](int off) {
        const int j = start + off;
        scored[static_cast<std::size_t>(off)] =
            score_trajectory(batch[static_cast<std::size_t>(j)], critic, gen.segment_rule,
                             ppo.gamma, ppo.lambda,
                             trace_root.child(static_cast<std::uint64_t>(j)));
      });

      std::vector<AdvantageVector> advantages;
      std::vector<CriticEpisode> episodes;
      std::int64_t mb_tokens = 0;
      for (int off = 0; off < end - start; ++off) {
        auto& sc = scored[static_cast<std::size_t>(off)];
        const Trajectory& traj = batch[static_cast<std::size_t>(start + off)];
        if (opts.hooks.on_genac_advantages)
          opts.hooks.on_genac_advantages(sc.advantages, sc.token_values, traj.reward);
        mb_tokens += static_cast<std::int64_t>(traj.response.size());
        result.tally.gen_critic_processed +=
            static_cast<double>(traj.response.size()) + sc.gen_tokens;
        result.tally.gen_critic_trained +=
            static_cast<double>(traj.response.size()) + sc.gen_tokens;
        advantages.push_back(std::move(sc.advantages));
        for (auto& ep : sc.episodes) {
          rv_total += ep.reward;
          if (!ep.trace.parsed_value) ++parse_failures;
          episodes.push_back(std::move(ep));
        }
      }
      episode_count += static_cast<std::int64_t>(episodes.size());

      // Actor PPO step.
      std::fill(actor_grad.begin(), actor_grad.end(), 0.0);
      actor_loss += ppo_actor_loss(actor,
                                   std::span<const Trajectory>(batch).subspan(
                                       static_cast<std::size_t>(start),
                                       static_cast<std::size_t>(end - start)),
                                   advantages, ppo.clip_eps, actor_grad);
      if (mb_tokens > 0) {
        for (double& g : actor_grad) g /= static_cast<double>(mb_tokens);
        actor_opt.step(actor.mutable_params(), actor_grad);
      }

      // Critic REINFORCE step.
      std::fill(critic_grad.begin(), critic_grad.end(), 0.0);
      reinforce_critic_loss(critic.model, episodes, critic_grad, gen.critic_mean_baseline);
      if (!episodes.empty()) {
        for (double& g : critic_grad) g /= static_cast<double>(episodes.size());
        critic_opt.step(critic.model.mutable_params(), critic_grad);
      }
    }

    result.tally.actor_generated += static_cast<double>(tokens);
    result.tally.actor_forward += static_cast<double>(tokens);
    result.tally.actor_trained += static_cast<double>(tokens);

    IterationMetrics m;
    m.iteration = iter;
    m.mean_reward = mean_reward(batch);
    m.actor_loss = tokens > 0 ? actor_loss / static_cast<double>(tokens) : 0.0;
    m.critic_mean_rv = episode_count > 0 ? rv_total / static_cast<double>(episode_count) : 0.0;
    m.parse_failure_rate =
        episode_count > 0 ? static_cast<double>(parse_failures) / static_cast<double>(episode_count)
                          : 0.0;
    m.icc_hint = critic.hint.value;
    m.flops = tally_flops(result.tally, pa, pc);
    if (eval_iteration(opts.eval, iter, ppo.max_iters))
      m.eval_success =
          evaluate_actor(spec, actor, opts.eval.prompts, opts.eval.samples, ppo.seed, opts.workers);
    if (opts.hooks.on_iteration) opts.hooks.on_iteration(m);
    result.metrics.push_back(m);
  }

  result.actor = std::move(actor);
  result.gen_critic = std::move(critic);
  return result;
}

// ---------------------------------------------------------------------------
// Pretraining
// ---------------------------------------------------------------------------

DiscPretrainResult pretrain_disc_critic(const SeqModel& frozen_actor, const TaskSpec& spec,
                                        DiscriminativeCritic critic,
                                        std::span<const LabeledState> validation,
                                        const PretrainConfig& cfg) {
  spec.validate();
  Optimizer opt(Optimizer::parse_kind(cfg.optimizer), cfg.lr,
                static_cast<std::size_t>(critic.param_count()));
  GradientVector grad(static_cast<std::size_t>(critic.param_count()));
  const RngStream root = RngStream(cfg.seed).child(stream::kPretrain);

  std::vector<double> val_mse_curve;
  TokenTally tally;
  int rounds_run = 0;
  double best = std::numeric_limits<double>::infinity();
  int patience_left = cfg.saturation_patience;

  for (int round = 0; round < cfg.max_rounds; ++round) {
    std::vector<Trajectory> batch(static_cast<std::size_t>(cfg.rollouts_per_round));
    parallel_for(cfg.rollouts_per_round, cfg.workers, [&](int i) {
      RngStream prng = root.child(static_cast<std::uint64_t>(round)).child(static_cast<std::uint64_t>(i)).child(0);
      RngStream arng = root.child(static_cast<std::uint64_t>(round)).child(static_cast<std::uint64_t>(i)).child(1);
      batch[static_cast<std::size_t>(i)] = sample_trajectory(spec, frozen_actor, prng, arng);
    });

    // Monte-Carlo return from every state of a trajectory (prompt state and
    // terminal state included) is its terminal reward.
    std::fill(grad.begin(), grad.end(), 0.0);
    std::int64_t terms = 0;
    for (const auto& traj : batch) {
      std::vector<int> ctx = traj.prompt;
      for (std::size_t t = 0; t <= traj.response.size(); ++t) {
        critic.accumulate_mse_grad(ctx, traj.reward, 1.0, grad);
        ++terms;
        if (t < traj.response.size()) ctx.push_back(traj.response[t]);
      }
      tally.disc_forward += static_cast<double>(traj.response.size());
      tally.disc_trained += static_cast<double>(traj.response.size());
    }
    if (terms > 0) {
      for (double& g : grad) g /= static_cast<double>(terms);
      opt.step(critic.mutable_params(), grad);
    }
    rounds_run = round + 1;

    if ((round + 1) % cfg.eval_every == 0 || round + 1 == cfg.max_rounds) {
      const double mse = benchmark_mse_disc(critic, validation);
      val_mse_curve.push_back(mse);
      if (mse < best - cfg.saturation_delta) {
        best = mse;
        patience_left = cfg.saturation_patience;
      } else if (--patience_left <= 0) {
        break;
      }
    }
  }

  const double final_mse = benchmark_mse_disc(critic, validation);
  return DiscPretrainResult{std::move(critic), std::move(val_mse_curve), final_mse, rounds_run,
                            tally};
}

GenPretrainResult pretrain_gen_critic(const SeqModel& frozen_actor, const TaskSpec& spec,
                                      GenCriticBundle critic, const SegmentRule& rule,
                                      std::span<const LabeledState> validation,
                                      const PretrainConfig& cfg) {
  spec.validate();
  Optimizer opt(Optimizer::parse_kind(cfg.optimizer), cfg.lr,
                static_cast<std::size_t>(critic.model.param_count()));
  GradientVector grad(static_cast<std::size_t>(critic.model.param_count()));
  const RngStream root = RngStream(cfg.seed).child(stream::kPretrain);

  critic.hint.value = 0.0;
  std::vector<double> val_mse_curve, mean_rv_curve, parse_failure_curve;
  TokenTally tally;
  int rounds_run = 0;
  double best = std::numeric_limits<double>::infinity();
  int patience_left = cfg.saturation_patience;

  for (int round = 0; round < cfg.max_rounds; ++round) {
    std::vector<Trajectory> batch(static_cast<std::size_t>(cfg.rollouts_per_round));
    parallel_for(cfg.rollouts_per_round, cfg.workers, [&](int i) {
      RngStream prng = root.child(static_cast<std::uint64_t>(round)).child(static_cast<std::uint64_t>(i)).child(0);
      RngStream arng = root.child(static_cast<std::uint64_t>(round)).child(static_cast<std::uint64_t>(i)).child(1);
      batch[static_cast<std::size_t>(i)] = sample_trajectory(spec, frozen_actor, prng, arng);
    });
    for (const auto& traj : batch) critic.hint = update_hint(critic.hint, traj.reward);

    std::vector<ScoredTrajectory> scored(batch.size());
    const RngStream trace_root =
        root.child(static_cast<std::uint64_t>(round)).child(stream::kCriticTrace);
    parallel_for(static_cast<int>(batch.size()), cfg.workers, [&](int i) {
      scored[static_cast<std::size_t>(i)] =
          score_trajectory(batch[static_cast<std::size_t>(i)], critic, rule, 1.0, 1.0,
                           trace_root.child(static_cast<std::uint64_t>(i)));
    });

    std::vector<CriticEpisode> episodes;
    double rv_total = 0.0;
    std::int64_t failures = 0;
    for (auto& sc : scored) {
      tally.gen_critic_processed += static_cast<double>(sc.token_values.size()) + sc.gen_tokens;
      tally.gen_critic_trained += static_cast<double>(sc.token_values.size()) + sc.gen_tokens;
      for (auto& ep : sc.episodes) {
        rv_total += ep.reward;
        if (!ep.trace.parsed_value) ++failures;
        episodes.push_back(std::move(ep));
      }
    }

    const int mb = std::max(1, cfg.minibatch);
    for (std::size_t start = 0; start < episodes.size(); start += static_cast<std::size_t>(mb)) {
      const std::size_t end = std::min(episodes.size(), start + static_cast<std::size_t>(mb));
      std::fill(grad.begin(), grad.end(), 0.0);
      reinforce_critic_loss(critic.model,
                            std::span<const CriticEpisode>(episodes).subspan(start, end - start),
                            grad, false);
      for (double& g : grad) g /= static_cast<double>(end - start);
      opt.step(critic.model.mutable_params(), grad);
    }

    mean_rv_curve.push_back(episodes.empty() ? 0.0
                                             : rv_total / static_cast<double>(episodes.size()));
    parse_failure_curve.push_back(
        episodes.empty() ? 0.0 : static_cast<double>(failures) / static_cast<double>(episodes.size()));
    rounds_run = round + 1;

    if ((round + 1) % cfg.eval_every == 0 || round + 1 == cfg.max_rounds) {
      const double mse = benchmark_mse_gen(critic, validation, DecodeMode::greedy, 0, cfg.workers).mse;
      val_mse_curve.push_back(mse);
      if (mse < best - cfg.saturation_delta) {
        best = mse;
        patience_left = cfg.saturation_patience;
      } else if (--patience_left <= 0) {
        break;
      }
    }
  }

  const GenBenchmarkResult final_eval =
      benchmark_mse_gen(critic, validation, DecodeMode::greedy, 0, cfg.workers);
  return GenPretrainResult{std::move(critic),
                           std::move(val_mse_curve),
                           std::move(mean_rv_curve),
                           std::move(parse_failure_curve),
                           final_eval.mse,
                           final_eval.parse_failure_rate,
                           rounds_run,
                           tally};
}

SftDataset build_sft_dataset(const SeqModel& frozen_actor, const TaskSpec& spec,
                             const CriticVocab& vocab, const SftDatasetConfig& cfg) {
  spec.validate();
  if (cfg.n_examples < 1) throw std::invalid_argument("build_sft_dataset: n_examples must be >= 1");

  SftDataset out;
  out.final_hint = IccHint{0.0, cfg.icc_momentum};
  const RngStream root = RngStream(cfg.seed).child(stream::kSft);

  std::uint64_t traj_index = 0;
  while (static_cast<int>(out.examples.size()) < cfg.n_examples) {
    RngStream prng = root.child(traj_index).child(0);
    RngStream arng = root.child(traj_index).child(1);
    RngStream label_rng = root.child(traj_index).child(2);
    RngStream noise_rng = root.child(traj_index).child(3);
    const Trajectory traj = sample_trajectory(spec, frozen_actor, prng, arng);
    out.final_hint = update_hint(out.final_hint, traj.reward);

    const Segmentation seg = segment(traj.response, cfg.segment_rule);
    const std::vector<int> bounds = seg.boundaries();
    MdpState state;
    state.prompt = traj.prompt;
    for (int k = 0; k <= seg.count() && static_cast<int>(out.examples.size()) < cfg.n_examples;
         ++k) {
      state.partial_response.assign(
          traj.response.begin(),
          traj.response.begin() + (k == 0 ? 0 : bounds[static_cast<std::size_t>(k - 1)]));
      const LabeledState labeled =
          label_state(state, frozen_actor, spec, cfg.labeler, label_rng);
      SftExample ex;
      ex.context = build_context(state, out.final_hint, cfg.actor_tag, cfg.icc_enabled, vocab);
      ex.target = synthesize_sft_trace(state, spec, labeled.value, cfg.eta, noise_rng, vocab);
      out.examples.push_back(std::move(ex));
    }
    ++traj_index;
  }
  return out;
}

}  // namespace genac
