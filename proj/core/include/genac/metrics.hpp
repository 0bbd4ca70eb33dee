#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

namespace genac {

inline constexpr int kMetricsSchemaVersion = 1;

// One results row per training iteration. Wall-clock time is kept out of the
// metrics stream (it goes to a timing sidecar) so that reruns of the same
// (config, seed) produce byte-identical metrics files.
struct IterationMetrics {
  int iteration = 0;
  double mean_reward = 0.0;
  double actor_loss = 0.0;
  std::optional<double> critic_loss;      // discriminative arm: MSE
  std::optional<double> critic_mean_rv;   // generative arm: mean R_v
  std::optional<double> parse_failure_rate;
  std::optional<double> icc_hint;
  std::optional<double> eval_success;     // present on eval iterations only
  double flops = 0.0;                     // cumulative, Appendix-style tally
  double wall_clock_ms = 0.0;             // sidecar only
};

// Deterministic serialization (sorted keys, no wall clock).
nlohmann::json metrics_to_json(const IterationMetrics& m);

// Metrics row as emitted to metrics.jsonl: iteration metrics plus run
// identity. run_id is derived from (config hash, seed) and is stable across
// reruns; the timestamped directory name is not part of the record.
struct MetricsRecord {
  std::string run_id;
  std::string config_hash;
  int schema_version = kMetricsSchemaVersion;
  IterationMetrics metrics;
};

nlohmann::json record_to_json(const MetricsRecord& r);

// Append-only JSONL writer; every line is flushed as written so the file is
// valid up to the last complete line after an interruption.
class JsonlWriter {
 public:
  explicit JsonlWriter(const std::filesystem::path& path);

  void write(const nlohmann::json& obj);

 private:
  std::ofstream out_;
};

}  // namespace genac
