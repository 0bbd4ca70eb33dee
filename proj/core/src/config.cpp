#include "genac/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace genac {

namespace {

// Section reader that tracks consumed keys so anything left over can be
// rejected by dotted path.
class Reader {
 public:
  Reader(const nlohmann::json& j, std::string path) : obj_(&j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError("config error: '" + path_ + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    if (!obj_->contains(key)) return;
    consumed_.insert(key);
    try {
      obj_->at(key).get_to(out);
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("config error: bad value type for '" + dotted(key) + "'");
    }
  }

  bool has(const char* key) const { return obj_->contains(key); }

  const nlohmann::json* section(const char* key) {
    if (!obj_->contains(key)) return nullptr;
    consumed_.insert(key);
    return &obj_->at(key);
  }

  void finish() const {
    for (const auto& [key, value] : obj_->items()) {
      if (!consumed_.count(key))
        throw ConfigError("config error: unknown key '" + dotted(key.c_str()) + "'");
    }
  }

  std::string dotted(const char* key) const {
    return path_.empty() ? std::string(key) : path_ + "." + key;
  }

 private:
  const nlohmann::json* obj_;
  std::string path_;
  std::set<std::string> consumed_;
};

void read_net(const nlohmann::json* j, const std::string& path, NetConfig& net) {
  if (!j) return;
  Reader r(*j, path);
  r.get("context_window", net.context_window);
  r.get("embed_dim", net.embed_dim);
  r.get("hidden_dim", net.hidden_dim);
  r.get("init_scale", net.init_scale);
  r.finish();
}

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig cfg;
  Reader r(j, "");
  r.get("schema_version", cfg.schema_version);
  r.get("seed", cfg.seed);
  r.get("out_dir", cfg.out_dir);
  r.get("algorithm", cfg.algorithm);
  r.get("optimizer", cfg.optimizer);

  if (const auto* t = r.section("task")) {
    Reader rt(*t, "task");
    rt.get("modulus", cfg.task.modulus);
    rt.get("prompt_len", cfg.task.prompt_len);
    rt.get("digit_dist", cfg.task.digit_dist);
    rt.get("seed", cfg.task.seed);
    rt.finish();
  }

  if (const auto* p = r.section("ppo")) {
    Reader rp(*p, "ppo");
    rp.get("clip_eps", cfg.ppo.clip_eps);
    rp.get("gamma", cfg.ppo.gamma);
    rp.get("lambda", cfg.ppo.lambda);
    rp.get("batch_size", cfg.ppo.batch_size);
    rp.get("minibatch_size", cfg.ppo.minibatch_size);
    rp.get("group_size", cfg.ppo.group_size);
    rp.get("epochs", cfg.ppo.epochs);
    rp.get("actor_lr", cfg.ppo.actor_lr);
    rp.get("critic_lr", cfg.ppo.critic_lr);
    rp.get("max_iters", cfg.ppo.max_iters);
    rp.finish();
  }

  read_net(r.section("actor"), "actor", cfg.actor);

  if (const auto* e = r.section("eval")) {
    Reader re(*e, "eval");
    re.get("prompts", cfg.eval.prompts);
    re.get("samples", cfg.eval.samples);
    re.get("every", cfg.eval.every);
    re.finish();
  }

  if (const auto* c = r.section("critic")) {
    Reader rc(*c, "critic");
    rc.get("family", cfg.critic.family);
    read_net(rc.section("net"), "critic.net", cfg.critic.net);
    rc.get("icc_enabled", cfg.critic.icc_enabled);
    rc.get("icc_momentum", cfg.critic.icc_momentum);
    rc.get("max_trace_len", cfg.critic.max_trace_len);
    rc.get("segment_len", cfg.critic.segment_len);
    rc.get("sft_eta", cfg.critic.sft_eta);
    rc.get("decode", cfg.critic.decode);
    rc.get("sigmoid_head", cfg.critic.sigmoid_head);
    rc.get("p_extra", cfg.critic.p_extra);
    rc.get("t_extra", cfg.critic.t_extra);
    rc.get("init_checkpoint", cfg.critic.init_checkpoint);
    rc.get("validation_states", cfg.critic.validation_states);
    if (const auto* s = rc.section("sft")) {
      Reader rs(*s, "critic.sft");
      rs.get("examples", cfg.critic.sft.examples);
      rs.get("epochs", cfg.critic.sft.epochs);
      rs.get("lr", cfg.critic.sft.lr);
      rs.get("minibatch", cfg.critic.sft.minibatch);
      rs.finish();
    }
    if (const auto* s = rc.section("rl")) {
      Reader rs(*s, "critic.rl");
      rs.get("max_rounds", cfg.critic.rl.max_rounds);
      rs.get("rollouts_per_round", cfg.critic.rl.rollouts_per_round);
      rs.get("lr", cfg.critic.rl.lr);
      rs.get("minibatch", cfg.critic.rl.minibatch);
      rs.get("eval_every", cfg.critic.rl.eval_every);
      rs.get("saturation_delta", cfg.critic.rl.saturation_delta);
      rs.get("saturation_patience", cfg.critic.rl.saturation_patience);
      rs.finish();
    }
    rc.finish();
  }

  if (const auto* p = r.section("probe")) {
    Reader rp(*p, "probe");
    rp.get("name", cfg.probe.name);
    if (const auto* s = rp.section("cost")) {
      Reader rs(*s, "probe.cost");
      rs.get("actor_params", cfg.probe.cost.actor_params);
      rs.get("critic_params", cfg.probe.cost.critic_params);
      rs.get("total_tokens", cfg.probe.cost.total_tokens);
      rs.get("avg_segment_len", cfg.probe.cost.avg_segment_len);
      rs.get("avg_critic_len", cfg.probe.cost.avg_critic_len);
      rs.get("avg_branch_len", cfg.probe.cost.avg_branch_len);
      rs.get("branches", cfg.probe.cost.branches);
      rs.finish();
    }
    if (const auto* s = rp.section("approx")) {
      Reader rs(*s, "probe.approx");
      rs.get("capacities", cfg.probe.approx.capacities);
      rs.get("n_seeds", cfg.probe.approx.n_seeds);
      rs.get("disc_lr_grid", cfg.probe.approx.disc_lr_grid);
      rs.get("gen_lr", cfg.probe.approx.gen_lr);
      rs.get("benchmark_states", cfg.probe.approx.benchmark_states);
      rs.finish();
    }
    if (const auto* s = rp.section("rank")) {
      Reader rs(*s, "probe.rank");
      rs.get("pool_sizes", cfg.probe.rank.pool_sizes);
      rs.get("n_prompts", cfg.probe.rank.n_prompts);
      rs.get("scorer", cfg.probe.rank.scorer);
      rs.get("critic_checkpoint", cfg.probe.rank.critic_checkpoint);
      rs.finish();
    }
    if (const auto* s = rp.section("ood")) {
      Reader rs(*s, "probe.ood");
      rs.get("n_states", cfg.probe.ood.n_states);
      rs.get("disc_checkpoint", cfg.probe.ood.disc_checkpoint);
      rs.get("gen_checkpoint", cfg.probe.ood.gen_checkpoint);
      rs.finish();
    }
    if (const auto* s = rp.section("ablation")) {
      Reader rs(*s, "probe.ablation");
      rs.get("benchmark_states", cfg.probe.ablation.benchmark_states);
      rs.finish();
    }
    rp.finish();
  }

  r.finish();
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config error: cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // Translate byte offset to a line number.
    std::size_t line = 1;
    for (std::size_t i = 0; i < e.byte && i < text.size(); ++i)
      if (text[i] == '\n') ++line;
    throw ConfigError("config error at " + path.string() + ":" + std::to_string(line) + ": " +
                      e.what());
  }

  try {
    return from_json(j);
  } catch (const ConfigError& e) {
    // Best-effort line annotation: locate the offending key in the source.
    const std::string msg = e.what();
    const auto q1 = msg.find('\'');
    const auto q2 = msg.rfind('\'');
    if (q1 != std::string::npos && q2 > q1) {
      std::string dotted = msg.substr(q1 + 1, q2 - q1 - 1);
      const auto dot = dotted.rfind('.');
      const std::string leaf = dot == std::string::npos ? dotted : dotted.substr(dot + 1);
      const auto pos = text.find("\"" + leaf + "\"");
      if (pos != std::string::npos) {
        std::size_t line = 1;
        for (std::size_t i = 0; i < pos; ++i)
          if (text[i] == '\n') ++line;
        throw ConfigError(msg + " (" + path.string() + ":" + std::to_string(line) + ")");
      }
    }
    throw ConfigError(msg + " (" + path.string() + ")");
  }
}

nlohmann::json RunConfig::to_json() const {
  return nlohmann::json{
      {"schema_version", schema_version},
      {"seed", seed},
      {"out_dir", out_dir},
      {"algorithm", algorithm},
      {"optimizer", optimizer},
      {"task",
       {{"modulus", task.modulus},
        {"prompt_len", task.prompt_len},
        {"digit_dist", task.digit_dist},
        {"seed", task.seed}}},
      {"ppo",
       {{"clip_eps", ppo.clip_eps},
        {"gamma", ppo.gamma},
        {"lambda", ppo.lambda},
        {"batch_size", ppo.batch_size},
        {"minibatch_size", ppo.minibatch_size},
        {"group_size", ppo.group_size},
        {"epochs", ppo.epochs},
        {"actor_lr", ppo.actor_lr},
        {"critic_lr", ppo.critic_lr},
        {"max_iters", ppo.max_iters}}},
      {"actor",
       {{"context_window", actor.context_window},
        {"embed_dim", actor.embed_dim},
        {"hidden_dim", actor.hidden_dim},
        {"init_scale", actor.init_scale}}},
      {"eval", {{"prompts", eval.prompts}, {"samples", eval.samples}, {"every", eval.every}}},
      {"critic",
       {{"family", critic.family},
        {"net",
         {{"context_window", critic.net.context_window},
          {"embed_dim", critic.net.embed_dim},
          {"hidden_dim", critic.net.hidden_dim},
          {"init_scale", critic.net.init_scale}}},
        {"icc_enabled", critic.icc_enabled},
        {"icc_momentum", critic.icc_momentum},
        {"max_trace_len", critic.max_trace_len},
        {"segment_len", critic.segment_len},
        {"sft_eta", critic.sft_eta},
        {"decode", critic.decode},
        {"sigmoid_head", critic.sigmoid_head},
        {"p_extra", critic.p_extra},
        {"t_extra", critic.t_extra},
        {"init_checkpoint", critic.init_checkpoint},
        {"validation_states", critic.validation_states},
        {"sft",
         {{"examples", critic.sft.examples},
          {"epochs", critic.sft.epochs},
          {"lr", critic.sft.lr},
          {"minibatch", critic.sft.minibatch}}},
        {"rl",
         {{"max_rounds", critic.rl.max_rounds},
          {"rollouts_per_round", critic.rl.rollouts_per_round},
          {"lr", critic.rl.lr},
          {"minibatch", critic.rl.minibatch},
          {"eval_every", critic.rl.eval_every},
          {"saturation_delta", critic.rl.saturation_delta},
          {"saturation_patience", critic.rl.saturation_patience}}}}},
      {"probe",
       {{"name", probe.name},
        {"cost",
         {{"actor_params", probe.cost.actor_params},
          {"critic_params", probe.cost.critic_params},
          {"total_tokens", probe.cost.total_tokens},
          {"avg_segment_len", probe.cost.avg_segment_len},
          {"avg_critic_len", probe.cost.avg_critic_len},
          {"avg_branch_len", probe.cost.avg_branch_len},
          {"branches", probe.cost.branches}}},
        {"approx",
         {{"capacities", probe.approx.capacities},
          {"n_seeds", probe.approx.n_seeds},
          {"disc_lr_grid", probe.approx.disc_lr_grid},
          {"gen_lr", probe.approx.gen_lr},
          {"benchmark_states", probe.approx.benchmark_states}}},
        {"rank",
         {{"pool_sizes", probe.rank.pool_sizes},
          {"n_prompts", probe.rank.n_prompts},
          {"scorer", probe.rank.scorer},
          {"critic_checkpoint", probe.rank.critic_checkpoint}}},
        {"ood",
         {{"n_states", probe.ood.n_states},
          {"disc_checkpoint", probe.ood.disc_checkpoint},
          {"gen_checkpoint", probe.ood.gen_checkpoint}}},
        {"ablation", {{"benchmark_states", probe.ablation.benchmark_states}}}}},
  };
}

std::string RunConfig::hash() const {
  const std::string canonical = to_json().dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const unsigned char c : canonical) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  static const char* hex = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = hex[h & 0xF];
    h >>= 4;
  }
  return out;
}

std::string RunConfig::run_id() const {
  return hash().substr(0, 8) + "-s" + std::to_string(seed);
}

void RunConfig::validate() const {
  if (schema_version != 1)
    throw ConfigError("config error: unsupported 'schema_version' " +
                      std::to_string(schema_version));
  const std::set<std::string> algos = {"grpo", "rloo", "vcppo", "genac"};
  if (!algos.count(algorithm))
    throw ConfigError("config error: unknown 'algorithm' value '" + algorithm + "'");
  try {
    task.validate();
    ppo.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config error: ") + e.what());
  }
  if (critic.family != "gen" && critic.family != "disc")
    throw ConfigError("config error: 'critic.family' must be gen or disc");
  if (algorithm == "genac" && critic.family != "gen")
    throw ConfigError("config error: algorithm genac requires 'critic.family' gen");
  if (algorithm == "vcppo" && critic.family != "disc")
    throw ConfigError("config error: algorithm vcppo requires 'critic.family' disc");
  if (critic.decode != "greedy" && critic.decode != "sample")
    throw ConfigError("config error: 'critic.decode' must be greedy or sample");
  if (critic.icc_momentum <= 0.0 || critic.icc_momentum >= 1.0)
    throw ConfigError("config error: 'critic.icc_momentum' must be in (0,1)");
  if (critic.max_trace_len < 1)
    throw ConfigError("config error: 'critic.max_trace_len' must be >= 1");
  if (critic.segment_len < 1)
    throw ConfigError("config error: 'critic.segment_len' must be >= 1");
  if (critic.sft_eta < 0.0) throw ConfigError("config error: 'critic.sft_eta' must be >= 0");
  if (critic.p_extra < 0 || critic.t_extra < 0)
    throw ConfigError("config error: vocabulary headroom must be >= 0");
  const std::set<std::string> probes = {"approx", "rank", "ood", "ablation", "cost"};
  if (!probes.count(probe.name))
    throw ConfigError("config error: unknown 'probe.name' value '" + probe.name + "'");
  const std::set<std::string> scorers = {"gen", "disc", "oracle", "random"};
  if (!scorers.count(probe.rank.scorer))
    throw ConfigError("config error: unknown 'probe.rank.scorer' value '" + probe.rank.scorer +
                      "'");
}

ModelDims actor_dims(const RunConfig& cfg) {
  return ModelDims{cfg.task.modulus, cfg.actor.context_window, cfg.actor.embed_dim,
                   cfg.actor.hidden_dim, cfg.task.prompt_len + cfg.task.horizon() + 1};
}

CriticVocab critic_vocab(const RunConfig& cfg) {
  return CriticVocab::for_task(cfg.task, cfg.critic.p_extra, cfg.critic.t_extra);
}

ModelDims gen_critic_dims(const RunConfig& cfg) {
  const CriticVocab vocab = critic_vocab(cfg);
  const int max_ctx = 6 + (cfg.task.prompt_len + cfg.critic.t_extra) +
                      (cfg.task.horizon() + cfg.critic.t_extra) + cfg.critic.max_trace_len;
  return ModelDims{vocab.size(), cfg.critic.net.context_window, cfg.critic.net.embed_dim,
                   cfg.critic.net.hidden_dim, max_ctx + 1};
}

ModelDims disc_critic_dims(const RunConfig& cfg) {
  const int max_ctx = (cfg.task.prompt_len + cfg.critic.t_extra) +
                      (cfg.task.horizon() + cfg.critic.t_extra);
  return ModelDims{cfg.task.modulus + cfg.critic.p_extra, cfg.critic.net.context_window,
                   cfg.critic.net.embed_dim, cfg.critic.net.hidden_dim, max_ctx + 1};
}

PpoConfig ppo_from_config(const RunConfig& cfg) {
  PpoConfig ppo = cfg.ppo;
  ppo.seed = cfg.seed;
  return ppo;
}

}  // namespace genac
