#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "genac/checkpoint.hpp"
#include "genac/metrics.hpp"

using namespace genac;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::filesystem::path tmp(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_SUITE("checkpoint") {
  TEST_CASE("actor checkpoints round-trip bit-exactly") {
    RngStream rng(3);
    const ModelDims dims{5, 4, 8, 6, 13};
    const SeqModel actor = SeqModel::random_init(dims, 0.7, rng);

    const auto p1 = tmp("genac_ckpt_a1.bin"), p2 = tmp("genac_ckpt_a2.bin");
    save_checkpoint(p1, checkpoint_of_actor(actor, 5));
    const Checkpoint loaded = load_checkpoint(p1);
    const SeqModel back = actor_from_checkpoint(loaded);

    REQUIRE(back.params().size() == actor.params().size());
    for (std::size_t i = 0; i < actor.params().size(); ++i)
      CHECK(back.params()[i] == actor.params()[i]);  // bitwise for doubles

    save_checkpoint(p2, checkpoint_of_actor(back, 5));
    CHECK(slurp(p1) == slurp(p2));
    std::filesystem::remove(p1);
    std::filesystem::remove(p2);
  }

  TEST_CASE("generative critic checkpoints keep vocab caps, hint, and flags") {
    RngStream rng(5);
    const CriticVocab vocab{8, 7};
    const ModelDims dims{vocab.size(), 20, 6, 0, 40};
    GenCriticBundle bundle{SeqModel::random_init(dims, 0.3, rng), vocab,
                           IccHint{0.37, 0.95},   3,    false, 6};

    const auto p = tmp("genac_ckpt_g.bin");
    save_checkpoint(p, checkpoint_of_gen_critic(bundle));
    const GenCriticBundle back = gen_critic_from_checkpoint(load_checkpoint(p));

    CHECK(back.vocab.t_cap == 8);
    CHECK(back.vocab.p_cap == 7);
    CHECK(back.hint.value == 0.37);
    CHECK(back.hint.momentum == 0.95);
    CHECK(back.actor_tag == 3);
    CHECK(back.icc_enabled == false);
    CHECK(back.max_trace_len == 6);
    for (std::size_t i = 0; i < bundle.model.params().size(); ++i)
      CHECK(back.model.params()[i] == bundle.model.params()[i]);
    std::filesystem::remove(p);
  }

  TEST_CASE("kind mismatches are rejected") {
    RngStream rng(7);
    const SeqModel actor = SeqModel::random_init(ModelDims{4, 2, 4, 0, 8}, 0.5, rng);
    const auto p = tmp("genac_ckpt_k.bin");
    save_checkpoint(p, checkpoint_of_actor(actor, 4));
    CHECK_THROWS_AS((void)disc_critic_from_checkpoint(load_checkpoint(p)), std::runtime_error);
    CHECK_THROWS_AS((void)gen_critic_from_checkpoint(load_checkpoint(p)), std::runtime_error);
    std::filesystem::remove(p);
  }

  TEST_CASE("corrupt files are rejected") {
    const auto p = tmp("genac_ckpt_bad.bin");
    {
      std::ofstream out(p, std::ios::binary);
      out << "not a checkpoint";
    }
    CHECK_THROWS_AS((void)load_checkpoint(p), std::runtime_error);
    std::filesystem::remove(p);
    CHECK_THROWS_AS((void)load_checkpoint(tmp("genac_ckpt_missing.bin")), std::runtime_error);
  }
}

TEST_SUITE("metrics") {
  TEST_CASE("serialization is deterministic and excludes wall clock") {
    IterationMetrics m;
    m.iteration = 4;
    m.mean_reward = 0.25;
    m.actor_loss = -0.125;
    m.critic_mean_rv = 0.75;
    m.parse_failure_rate = 0.0;
    m.icc_hint = 0.3;
    m.flops = 1e6;
    m.wall_clock_ms = 123.0;  // must not appear
    const nlohmann::json j = metrics_to_json(m);
    CHECK(j.dump() == metrics_to_json(m).dump());
    CHECK_FALSE(j.contains("wall_clock_ms"));
    CHECK_FALSE(j.contains("eval_success"));  // not set on this row
    CHECK(j["iteration"] == 4);
  }

  TEST_CASE("jsonl output stays line-parseable after truncation") {
    const auto p = std::filesystem::temp_directory_path() / "genac_metrics_trunc.jsonl";
    {
      JsonlWriter w(p);
      for (int i = 0; i < 5; ++i) {
        IterationMetrics m;
        m.iteration = i;
        m.mean_reward = 0.1 * i;
        MetricsRecord rec{"abc-s1", "deadbeef", kMetricsSchemaVersion, m};
        w.write(record_to_json(rec));
      }
    }
    // Simulate an interruption mid-line.
    const std::string full = [&] {
      std::ifstream in(p);
      return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }();
    {
      std::ofstream out(p, std::ios::binary | std::ios::trunc);
      out << full.substr(0, full.size() - 7);
    }
    std::ifstream in(p);
    std::string line;
    int complete = 0;
    while (std::getline(in, line)) {
      if (in.eof()) break;  // final partial line has no terminator
      const nlohmann::json j = nlohmann::json::parse(line);
      CHECK(j["iteration"] == complete);
      CHECK(j["schema_version"] == kMetricsSchemaVersion);
      ++complete;
    }
    CHECK(complete == 4);
    std::filesystem::remove(p);
  }
}
