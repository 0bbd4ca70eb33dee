#include "genac/metrics.hpp"

#include <stdexcept>

namespace genac {

nlohmann::json metrics_to_json(const IterationMetrics& m) {
  nlohmann::json j{
      {"iteration", m.iteration},
      {"mean_reward", m.mean_reward},
      {"actor_loss", m.actor_loss},
      {"flops", m.flops},
  };
  if (m.critic_loss) j["critic_loss"] = *m.critic_loss;
  if (m.critic_mean_rv) j["critic_mean_rv"] = *m.critic_mean_rv;
  if (m.parse_failure_rate) j["parse_failure_rate"] = *m.parse_failure_rate;
  if (m.icc_hint) j["icc_hint"] = *m.icc_hint;
  if (m.eval_success) j["eval_success"] = *m.eval_success;
  return j;
}

nlohmann::json record_to_json(const MetricsRecord& r) {
  nlohmann::json j = metrics_to_json(r.metrics);
  j["run_id"] = r.run_id;
  j["config_hash"] = r.config_hash;
  j["schema_version"] = r.schema_version;
  return j;
}

JsonlWriter::JsonlWriter(const std::filesystem::path& path) : out_(path) {
  if (!out_) throw std::runtime_error("JsonlWriter: cannot open " + path.string());
}

void JsonlWriter::write(const nlohmann::json& obj) {
  out_ << obj.dump() << '\n';
  out_.flush();
  if (!out_) throw std::runtime_error("JsonlWriter: write failed");
}

}  // namespace genac
