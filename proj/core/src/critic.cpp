#include "genac/critic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace genac {

// ----- vocabulary -----

int CriticVocab::reason(int i) const {
  if (i < 0 || i >= kReasonCount) throw std::invalid_argument("CriticVocab: bad reason index");
  return i;
}

int CriticVocab::score(int k) const {
  if (k < 0 || k >= kScoreCount) throw std::invalid_argument("CriticVocab: bad score index");
  return kReasonCount + k;
}

int CriticVocab::hint(int bucket) const {
  if (bucket < 0 || bucket > 10) throw std::invalid_argument("CriticVocab: bad hint bucket");
  return 29 + bucket;
}

int CriticVocab::size_tag(int s) const {
  if (s < 0 || s >= kSizeTags) throw std::invalid_argument("CriticVocab: bad size tag");
  return 40 + s;
}

int CriticVocab::step_mark(int step_index) const {
  if (step_index < 0 || step_index > t_cap)
    throw std::invalid_argument("CriticVocab: step index exceeds t_cap");
  return 49 + step_index;
}

int CriticVocab::digit(int value) const {
  if (value < 0 || value >= p_cap)
    throw std::invalid_argument("CriticVocab: digit exceeds p_cap");
  return 50 + t_cap + value;
}

std::optional<int> CriticVocab::as_score(int token) {
  if (token >= kReasonCount && token < kReasonCount + kScoreCount) return token - kReasonCount;
  return std::nullopt;
}

CriticVocab CriticVocab::for_task(const TaskSpec& spec, int extra_p, int extra_t) {
  return CriticVocab{spec.horizon() + extra_t, spec.modulus + extra_p};
}

// ----- ICC -----

IccHint update_hint(IccHint hint, double reward) {
  hint.value = hint.momentum * hint.value + (1.0 - hint.momentum) * reward;
  return hint;
}

int hint_bucket(double r_bar) {
  const int b = static_cast<int>(std::lround(10.0 * r_bar));
  return std::clamp(b, 0, 10);
}

int actor_size_tag(const ModelDims& actor_dims) {
  const int d = std::max(1, actor_dims.embed_dim);
  const int tag = static_cast<int>(std::lround(std::log2(static_cast<double>(d)))) - 2;
  return std::clamp(tag, 0, CriticVocab::kSizeTags - 1);
}

// ----- contexts and traces -----

CriticContext build_context(const MdpState& state, const IccHint& hint, int actor_tag,
                            bool icc_enabled, const CriticVocab& vocab) {
  CriticContext ctx;
  ctx.tokens.reserve(6 + state.prompt.size() + state.partial_response.size());
  ctx.tokens.push_back(vocab.bos());
  if (icc_enabled) {
    ctx.tokens.push_back(vocab.hint(hint_bucket(hint.value)));
    ctx.tokens.push_back(vocab.size_tag(actor_tag));
  }
  ctx.tokens.push_back(vocab.step_mark(static_cast<int>(state.partial_response.size())));
  ctx.tokens.push_back(vocab.sep());
  for (const int d : state.prompt) ctx.tokens.push_back(vocab.digit(d));
  ctx.tokens.push_back(vocab.sep());
  for (const int d : state.partial_response) ctx.tokens.push_back(vocab.digit(d));
  return ctx;
}

DecodeMode parse_decode_mode(const std::string& name) {
  if (name == "sample") return DecodeMode::sample;
  if (name == "greedy") return DecodeMode::greedy;
  throw std::invalid_argument("unknown decode mode: " + name);
}

std::optional<double> parse_value(std::span<const int> trace, const CriticVocab&) {
  for (const int tok : trace) {
    if (const auto k = CriticVocab::as_score(tok)) return *k / 10.0;
  }
  return std::nullopt;
}

CriticTrace gen_trace(const SeqModel& critic, const CriticContext& context,
                      int max_trace_len, DecodeMode mode, RngStream* rng,
                      const CriticVocab& vocab) {
  if (mode == DecodeMode::sample && rng == nullptr)
    throw std::invalid_argument("gen_trace: sampling requires an rng");
  CriticTrace trace;
  std::vector<int> ctx = context.tokens;
  for (int t = 0; t < max_trace_len; ++t) {
    const int tok = mode == DecodeMode::greedy ? critic.greedy(ctx) : critic.sample(ctx, *rng);
    trace.tokens.push_back(tok);
    if (tok == vocab.eot()) break;
    ctx.push_back(tok);
  }
  trace.parsed_value = parse_value(trace.tokens, vocab);
  return trace;
}

double critic_reward(const CriticTrace& trace, double observed_reward) {
  if (observed_reward != 0.0 && observed_reward != 1.0)
    throw std::invalid_argument("critic_reward: observed reward must be 0 or 1");
  if (!trace.parsed_value.has_value()) return 0.0;
  const double diff = observed_reward - *trace.parsed_value;
  return 1.0 - diff * diff;
}

double reinforce_critic_loss(const SeqModel& critic, std::span<const CriticEpisode> episodes,
                             std::span<double> grad_out, bool mean_baseline) {
  double baseline = 0.0;
  if (mean_baseline && !episodes.empty()) {
    for (const auto& ep : episodes) baseline += ep.reward;
    baseline /= static_cast<double>(episodes.size());
  }

  double loss = 0.0;
  std::vector<int> ctx;
  for (const auto& ep : episodes) {
    const double w = ep.reward - baseline;
    ctx = ep.context.tokens;
    for (const int tok : ep.trace.tokens) {
      loss -= ep.reward * critic.logprob(ctx, tok);
      if (w != 0.0) critic.accumulate_grad_logprob(ctx, tok, -w, grad_out);
      ctx.push_back(tok);
    }
  }
  return loss;
}

// ----- scripted SFT oracle -----

std::vector<int> synthesize_sft_trace(const MdpState& state, const TaskSpec& spec,
                                      double oracle_value, double eta, RngStream& rng,
                                      const CriticVocab& vocab) {
  if (oracle_value < 0.0 || oracle_value > 1.0)
    throw std::invalid_argument("synthesize_sft_trace: oracle value must be in [0,1]");

  // Does the partial response track the prompt's running prefix sums mod p?
  // That is the strategy under which intermediate tokens help the actor, so
  // it is the one state feature worth verbalizing.
  bool on_track = true;
  long long prefix = 0;
  const std::size_t checked = std::min(state.partial_response.size(), state.prompt.size());
  for (std::size_t i = 0; i < checked; ++i) {
    prefix += state.prompt[i];
    if (state.partial_response[i] != static_cast<int>(prefix % spec.modulus)) {
      on_track = false;
      break;
    }
  }

  double v = oracle_value;
  if (eta > 0.0) v += eta * rng.gaussian();
  v = std::clamp(v, 0.0, 1.0);

  std::vector<int> trace;
  trace.push_back(vocab.reason(std::min(static_cast<int>(state.partial_response.size()),
                                        CriticVocab::kReasonCount - 1)));
  trace.push_back(vocab.reason(on_track ? 1 : 0));
  trace.push_back(vocab.score(static_cast<int>(std::lround(10.0 * v))));
  trace.push_back(vocab.eot());
  return trace;
}

void write_sft_dataset(const std::filesystem::path& path, std::span<const SftExample> data) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_sft_dataset: cannot open " + path.string());
  for (const auto& ex : data) {
    for (std::size_t i = 0; i < ex.context.tokens.size(); ++i) {
      if (i) out << ' ';
      out << ex.context.tokens[i];
    }
    out << '\t';
    for (std::size_t i = 0; i < ex.target.size(); ++i) {
      if (i) out << ' ';
      out << ex.target[i];
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write_sft_dataset: write failed for " + path.string());
}

std::vector<SftExample> read_sft_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_sft_dataset: cannot open " + path.string());
  std::vector<SftExample> data;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error("read_sft_dataset: missing tab at " + path.string() + ":" +
                               std::to_string(lineno));
    SftExample ex;
    std::istringstream ctx(line.substr(0, tab)), tgt(line.substr(tab + 1));
    int tok = 0;
    while (ctx >> tok) ex.context.tokens.push_back(tok);
    while (tgt >> tok) ex.target.push_back(tok);
    data.push_back(std::move(ex));
  }
  return data;
}

SftFitResult sft_fit(SeqModel& critic, std::span<const SftExample> data, const SftFitConfig& cfg) {
  if (data.empty()) throw std::invalid_argument("sft_fit: dataset must be non-empty");
  if (cfg.lr <= 0.0) throw std::invalid_argument("sft_fit: lr must be > 0");

  RngStream rng(split_mix64(cfg.seed ^ 0x5F7));
  Optimizer opt(Optimizer::parse_kind(cfg.optimizer), cfg.lr,
                static_cast<std::size_t>(critic.param_count()));
  GradientVector grad(static_cast<std::size_t>(critic.param_count()));
  std::vector<int> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  SftFitResult result;
  std::vector<int> ctx;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_indices(order, rng);
    double epoch_nll = 0.0;
    std::int64_t epoch_tokens = 0;
    const int mb = std::max(1, cfg.minibatch);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(mb)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(mb));
      std::fill(grad.begin(), grad.end(), 0.0);
      std::int64_t batch_tokens = 0;
      for (std::size_t i = start; i < end; ++i) {
        const auto& ex = data[static_cast<std::size_t>(order[i])];
        ctx = ex.context.tokens;
        for (const int tok : ex.target) {
          epoch_nll -= critic.logprob(ctx, tok);
          critic.accumulate_grad_logprob(ctx, tok, -1.0, grad);
          ctx.push_back(tok);
          ++batch_tokens;
        }
      }
      epoch_tokens += batch_tokens;
      if (batch_tokens > 0) {
        const double inv = 1.0 / static_cast<double>(batch_tokens);
        for (double& g : grad) g *= inv;
        opt.step(critic.mutable_params(), grad);
      }
    }
    result.nll_curve.push_back(epoch_nll / static_cast<double>(std::max<std::int64_t>(1, epoch_tokens)));
  }
  return result;
}

// ----- discriminative critic -----

namespace {
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}  // namespace

DiscriminativeCritic::DiscriminativeCritic(ModelDims dims, bool sigmoid_head)
    : dims_(dims), sigmoid_head_(sigmoid_head),
      net_(NetDims{dims.vocab_size, dims.context_window, dims.embed_dim, dims.hidden_dim, 1,
                   dims.max_positions}) {}

DiscriminativeCritic DiscriminativeCritic::random_init(ModelDims dims, bool sigmoid_head,
                                                       double scale, RngStream& rng) {
  DiscriminativeCritic c(dims, sigmoid_head);
  c.net_.randomize(scale, rng);
  return c;
}

double DiscriminativeCritic::predict(std::span<const int> state_tokens) const {
  double out = 0.0;
  net_.output(state_tokens, std::span<double>(&out, 1));
  return sigmoid_head_ ? sigmoid(out) : out;
}

void DiscriminativeCritic::accumulate_mse_grad(std::span<const int> state_tokens, double target,
                                               double weight, std::span<double> grad) const {
  double out = 0.0;
  net_.output(state_tokens, std::span<double>(&out, 1));
  const double v = sigmoid_head_ ? sigmoid(out) : out;
  double dout = 2.0 * (v - target);
  if (sigmoid_head_) dout *= v * (1.0 - v);
  dout *= weight;
  net_.accumulate_output_grad(state_tokens, std::span<const double>(&dout, 1), grad);
}

DiscFitResult disc_fit(DiscriminativeCritic& critic, std::span<const DiscSample> data,
                       const DiscFitConfig& cfg) {
  if (data.empty()) throw std::invalid_argument("disc_fit: dataset must be non-empty");
  if (cfg.lr <= 0.0) throw std::invalid_argument("disc_fit: lr must be > 0");

  RngStream rng(split_mix64(cfg.seed ^ 0xD15C));
  Optimizer opt(Optimizer::parse_kind(cfg.optimizer), cfg.lr,
                static_cast<std::size_t>(critic.param_count()));
  GradientVector grad(static_cast<std::size_t>(critic.param_count()));

  DiscFitResult result;
  const int mb = std::max(1, std::min<int>(cfg.minibatch, static_cast<int>(data.size())));
  for (int step = 0; step < cfg.steps; ++step) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double batch_mse = 0.0;
    for (int i = 0; i < mb; ++i) {
      const auto& s = data[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(data.size())))];
      const double v = critic.predict(s.state_tokens);
      batch_mse += (v - s.target) * (v - s.target);
      critic.accumulate_mse_grad(s.state_tokens, s.target, 1.0 / mb, grad);
    }
    result.mse_curve.push_back(batch_mse / mb);
    opt.step(critic.mutable_params(), grad);
  }

  double full = 0.0;
  for (const auto& s : data) {
    const double v = critic.predict(s.state_tokens);
    full += (v - s.target) * (v - s.target);
  }
  result.final_mse = full / static_cast<double>(data.size());
  return result;
}

// ----- bundle -----

CriticTrace GenCriticBundle::score(const MdpState& state, DecodeMode mode, RngStream* rng) const {
  const CriticContext ctx = build_context(state, hint, actor_tag, icc_enabled, vocab);
  return gen_trace(model, ctx, max_trace_len, mode, rng, vocab);
}

}  // namespace genac
