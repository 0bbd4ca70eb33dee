#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>

#include "genac/critic.hpp"
#include "test_helpers.hpp"

using namespace genac;
using namespace genac::testing;

namespace {

const CriticVocab kVocab{6, 5};  // t_cap 6, p_cap 5

MdpState make_state(std::vector<int> prompt, std::vector<int> partial) {
  MdpState s;
  s.prompt = std::move(prompt);
  s.partial_response = std::move(partial);
  return s;
}

ModelDims critic_dims(const CriticVocab& vocab, int k = 20, int d = 6, int h = 0) {
  return ModelDims{vocab.size(), k, d, h, 32};
}

// Critic model whose output is dominated by one token everywhere.
SeqModel forced_token_model(const CriticVocab& vocab, int token) {
  SeqModel m(critic_dims(vocab));
  const NetDims nd = m.dims().net_dims();
  const std::int64_t off_bo = static_cast<std::int64_t>(nd.embed_dim) * nd.feature_dim() +
                              nd.embed_dim +
                              static_cast<std::int64_t>(nd.output_dim) * nd.top_dim();
  m.mutable_params()[static_cast<std::size_t>(off_bo + token)] = 60.0;
  return m;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

}  // namespace

TEST_SUITE("critic") {
  TEST_CASE("vocabulary ids are distinct and within range") {
    std::vector<int> ids;
    for (int i = 0; i < CriticVocab::kReasonCount; ++i) ids.push_back(kVocab.reason(i));
    for (int k = 0; k <= 10; ++k) ids.push_back(kVocab.score(k));
    ids.push_back(kVocab.eot());
    ids.push_back(kVocab.bos());
    for (int b = 0; b <= 10; ++b) ids.push_back(kVocab.hint(b));
    for (int s = 0; s < CriticVocab::kSizeTags; ++s) ids.push_back(kVocab.size_tag(s));
    ids.push_back(kVocab.sep());
    for (int t = 0; t <= kVocab.t_cap; ++t) ids.push_back(kVocab.step_mark(t));
    for (int v = 0; v < kVocab.p_cap; ++v) ids.push_back(kVocab.digit(v));

    CHECK(static_cast<int>(ids.size()) == kVocab.size());
    std::sort(ids.begin(), ids.end());
    for (std::size_t i = 1; i < ids.size(); ++i) CHECK(ids[i] == ids[i - 1] + 1);
    CHECK(ids.front() == 0);
    CHECK(ids.back() == kVocab.size() - 1);
  }

  TEST_CASE("hint update follows the running-average recursion") {
    IccHint h{0.0, 0.9};
    h = update_hint(h, 1.0);
    CHECK(h.value == doctest::Approx(0.1).epsilon(1e-12));

    IccHint fixed{0.4, 0.9};
    CHECK(update_hint(fixed, 0.4).value == doctest::Approx(0.4).epsilon(1e-12));

    IccHint slow{0.0, 0.99};
    for (int i = 0; i < 1000; ++i) slow = update_hint(slow, 1.0);
    CHECK(std::abs(slow.value - 1.0) < 1e-3);
  }

  TEST_CASE("hint update contracts toward the reward") {
    RngStream rng(3);
    for (int trial = 0; trial < 100; ++trial) {
      const double c = 0.05 + 0.9 * rng.uniform();
      const double r = rng.uniform();
      IccHint h{rng.uniform(), c};
      const double before = std::abs(h.value - r);
      const double after = std::abs(update_hint(h, r).value - r);
      CHECK(after == doctest::Approx(c * before).epsilon(1e-9));
      CHECK(update_hint(h, r).value >= 0.0);
      CHECK(update_hint(h, r).value <= 1.0);
    }
  }

  TEST_CASE("hint buckets round to the nearest tenth") {
    CHECK(hint_bucket(0.34) == 3);
    CHECK(hint_bucket(0.0) == 0);
    CHECK(hint_bucket(1.0) == 10);
    CHECK(hint_bucket(0.95) == 10);
  }

  TEST_CASE("context serialization is deterministic and layout-stable") {
    const MdpState s = make_state({1, 2, 4}, {2, 0});
    const IccHint h{0.34, 0.9};
    const CriticContext a = build_context(s, h, 2, true, kVocab);
    const CriticContext b = build_context(s, h, 2, true, kVocab);
    CHECK(a.tokens == b.tokens);
    const std::vector<int> expect = {
        kVocab.bos(),      kVocab.hint(3),    kVocab.size_tag(2), kVocab.step_mark(2),
        kVocab.sep(),      kVocab.digit(1),   kVocab.digit(2),    kVocab.digit(4),
        kVocab.sep(),      kVocab.digit(2),   kVocab.digit(0)};
    CHECK(a.tokens == expect);
  }

  TEST_CASE("disabled ICC removes the hint information entirely") {
    const MdpState s = make_state({0, 3}, {1});
    const CriticContext a = build_context(s, IccHint{0.1, 0.9}, 1, false, kVocab);
    const CriticContext b = build_context(s, IccHint{0.9, 0.9}, 5, false, kVocab);
    CHECK(a.tokens == b.tokens);
    for (const int tok : a.tokens) {
      CHECK(tok != kVocab.hint(1));
      CHECK(tok != kVocab.size_tag(1));
    }
  }

  TEST_CASE("parse_value returns the first score token") {
    const std::vector<int> t1 = {kVocab.reason(3), kVocab.reason(1), kVocab.score(10),
                                 kVocab.eot()};
    CHECK(parse_value(t1, kVocab) == 1.0);
    const std::vector<int> t2 = {kVocab.score(0)};
    CHECK(parse_value(t2, kVocab) == 0.0);
    const std::vector<int> t3 = {kVocab.reason(2), kVocab.reason(2), kVocab.eot()};
    CHECK_FALSE(parse_value(t3, kVocab).has_value());
    const std::vector<int> t4 = {kVocab.score(4), kVocab.score(9)};
    CHECK(parse_value(t4, kVocab) == doctest::Approx(0.4));
  }

  TEST_CASE("all eleven score tokens parse to k/10 exactly") {
    for (int k = 0; k <= 10; ++k) {
      const std::vector<int> t = {kVocab.score(k)};
      CHECK(*parse_value(t, kVocab) == k / 10.0);
    }
  }

  TEST_CASE("gen_trace forced to a score token parses it") {
    const SeqModel m = forced_token_model(kVocab, kVocab.score(7));
    const CriticContext ctx = build_context(make_state({1}, {}), IccHint{}, 0, true, kVocab);
    const CriticTrace trace = gen_trace(m, ctx, 8, DecodeMode::greedy, nullptr, kVocab);
    CHECK(trace.parsed_value == 0.7);
  }

  TEST_CASE("gen_trace without score tokens fails to parse and respects max length") {
    const SeqModel m = forced_token_model(kVocab, kVocab.reason(2));
    const CriticContext ctx = build_context(make_state({1}, {}), IccHint{}, 0, true, kVocab);
    const CriticTrace trace = gen_trace(m, ctx, 5, DecodeMode::greedy, nullptr, kVocab);
    CHECK_FALSE(trace.parsed_value.has_value());
    CHECK(trace.tokens.size() == 5);
  }

  TEST_CASE("gen_trace stops at EOT") {
    const SeqModel m = forced_token_model(kVocab, kVocab.eot());
    const CriticContext ctx = build_context(make_state({1}, {}), IccHint{}, 0, true, kVocab);
    const CriticTrace trace = gen_trace(m, ctx, 8, DecodeMode::greedy, nullptr, kVocab);
    CHECK(trace.tokens == std::vector<int>{kVocab.eot()});
  }

  TEST_CASE("greedy decoding is repeatable") {
    RngStream rng(7);
    const SeqModel m =
        SeqModel::random_init(critic_dims(kVocab, 20, 8, 6), 0.5, rng);
    const CriticContext ctx = build_context(make_state({2, 3}, {1}), IccHint{0.2, 0.9}, 1, true,
                                            kVocab);
    const CriticTrace a = gen_trace(m, ctx, 8, DecodeMode::greedy, nullptr, kVocab);
    const CriticTrace b = gen_trace(m, ctx, 8, DecodeMode::greedy, nullptr, kVocab);
    CHECK(a.tokens == b.tokens);
  }

  TEST_CASE("critic reward formula") {
    CriticTrace t;
    t.parsed_value = 0.7;
    CHECK(critic_reward(t, 1.0) == doctest::Approx(0.91).epsilon(1e-12));
    t.parsed_value = 0.0;
    CHECK(critic_reward(t, 0.0) == 1.0);
    t.parsed_value.reset();
    CHECK(critic_reward(t, 1.0) == 0.0);
    CHECK_THROWS_AS((void)critic_reward(t, 0.4), std::invalid_argument);
  }

  TEST_CASE("critic reward is in [0,1] and is 1 only on exact agreement") {
    for (int k = 0; k <= 10; ++k) {
      for (const double r : {0.0, 1.0}) {
        CriticTrace t;
        t.parsed_value = k / 10.0;
        const double rv = critic_reward(t, r);
        CHECK(rv >= 0.0);
        CHECK(rv <= 1.0);
        CHECK((rv == 1.0) == (*t.parsed_value == r));
      }
    }
  }

  TEST_CASE("reinforce loss: zero rewards give a zero gradient") {
    RngStream rng(11);
    const SeqModel m = SeqModel::random_init(critic_dims(kVocab), 0.4, rng);
    std::vector<CriticEpisode> eps(3);
    for (auto& ep : eps) {
      ep.context = build_context(make_state({1, 2}, {}), IccHint{}, 0, true, kVocab);
      ep.trace.tokens = {kVocab.reason(1), kVocab.eot()};
      ep.reward = 0.0;
    }
    GradientVector grad(static_cast<std::size_t>(m.param_count()), 0.0);
    const double loss = reinforce_critic_loss(m, eps, grad);
    CHECK(loss == 0.0);
    for (const double g : grad) CHECK(g == 0.0);
  }

  TEST_CASE("reinforce loss with unit reward is the negated trace log-likelihood") {
    RngStream rng(13);
    const SeqModel m = SeqModel::random_init(critic_dims(kVocab), 0.4, rng);
    CriticEpisode ep;
    ep.context = build_context(make_state({4, 0}, {2}), IccHint{0.5, 0.9}, 1, true, kVocab);
    ep.trace.tokens = {kVocab.reason(2), kVocab.score(5), kVocab.eot()};
    ep.reward = 1.0;

    GradientVector grad(static_cast<std::size_t>(m.param_count()), 0.0);
    const double loss = reinforce_critic_loss(m, std::vector<CriticEpisode>{ep}, grad);

    double loglik = 0.0;
    GradientVector expect(static_cast<std::size_t>(m.param_count()), 0.0);
    std::vector<int> ctx = ep.context.tokens;
    for (const int tok : ep.trace.tokens) {
      loglik += m.logprob(ctx, tok);
      m.accumulate_grad_logprob(ctx, tok, -1.0, expect);
      ctx.push_back(tok);
    }
    CHECK(loss == doctest::Approx(-loglik).epsilon(1e-12));
    for (std::size_t i = 0; i < grad.size(); ++i)
      CHECK(grad[i] == doctest::Approx(expect[i]).epsilon(1e-12));
  }

  TEST_CASE("reinforce gradient matches finite differences") {
    RngStream rng(17);
    int checked = 0;
    for (int trial = 0; trial < 10; ++trial) {
      SeqModel m = SeqModel::random_init(critic_dims(kVocab, 16, 4, 0), 0.5, rng);
      std::vector<CriticEpisode> eps(2 + trial % 2);
      for (auto& ep : eps) {
        const MdpState s = make_state({rng.uniform_int(5), rng.uniform_int(5)},
                                      {rng.uniform_int(5)});
        ep.context = build_context(s, IccHint{rng.uniform(), 0.9}, 1, true, kVocab);
        RngStream trng = rng.child(static_cast<std::uint64_t>(trial));
        ep.trace = gen_trace(m, ep.context, 4, DecodeMode::sample, &trng, kVocab);
        ep.reward = critic_reward(ep.trace, rng.uniform() < 0.5 ? 0.0 : 1.0);
      }
      GradientVector analytic(static_cast<std::size_t>(m.param_count()), 0.0);
      reinforce_critic_loss(m, eps, analytic);
      GradientVector scratch(static_cast<std::size_t>(m.param_count()));
      const std::vector<double> fd = finite_difference_grad(m.mutable_params(), [&] {
        std::fill(scratch.begin(), scratch.end(), 0.0);
        return reinforce_critic_loss(m, eps, scratch);
      });
      CHECK(gradients_match(analytic, fd));
      ++checked;
    }
    CHECK(checked == 10);
  }

  TEST_CASE("synthesized traces end in the rounded score token") {
    RngStream rng(19);
    const TaskSpec spec{5, 3, {}, 0};
    const MdpState s = make_state({1, 2, 3}, {1});
    const std::vector<int> t = synthesize_sft_trace(s, spec, 0.62, 0.0, rng, kVocab);
    REQUIRE(t.size() == 4);
    CHECK(t[2] == kVocab.score(6));
    CHECK(t[3] == kVocab.eot());

    const std::vector<int> t2 = synthesize_sft_trace(s, spec, 1.0, 0.0, rng, kVocab);
    CHECK(t2[2] == kVocab.score(10));
  }

  TEST_CASE("synthesized reasoning tokens encode step and prefix-sum tracking") {
    RngStream rng(23);
    const TaskSpec spec{5, 3, {}, 0};
    // Partial response [1, 3] matches prefix sums of prompt [1,2,3]: 1, 3.
    const std::vector<int> on = synthesize_sft_trace(make_state({1, 2, 3}, {1, 3}), spec, 0.5,
                                                     0.0, rng, kVocab);
    CHECK(on[0] == kVocab.reason(2));  // two tokens generated so far
    CHECK(on[1] == kVocab.reason(1));  // on track
    const std::vector<int> off = synthesize_sft_trace(make_state({1, 2, 3}, {2}), spec, 0.5,
                                                      0.0, rng, kVocab);
    CHECK(off[0] == kVocab.reason(1));
    CHECK(off[1] == kVocab.reason(0));
  }

  TEST_CASE("noisy score distribution matches the clipped-gaussian rounding law") {
    RngStream rng(29);
    const TaskSpec spec{5, 2, {}, 0};
    const MdpState s = make_state({1, 2}, {});
    const double v = 0.62, eta = 0.3;
    const int n = 10000;
    std::vector<int> counts(11, 0);
    for (int i = 0; i < n; ++i) {
      const std::vector<int> t = synthesize_sft_trace(s, spec, v, eta, rng, kVocab);
      const auto k = CriticVocab::as_score(t[2]);
      REQUIRE(k.has_value());
      ++counts[static_cast<std::size_t>(*k)];
    }
    // Independent law: P(k) from the normal CDF of the rounding cell, with
    // the clip folding the tails into buckets 0 and 10.
    for (int k = 0; k <= 10; ++k) {
      double p = 0.0;
      if (k == 0) {
        p = normal_cdf((0.05 - v) / eta);
      } else if (k == 10) {
        p = 1.0 - normal_cdf((0.95 - v) / eta);
      } else {
        p = normal_cdf((k / 10.0 + 0.05 - v) / eta) - normal_cdf((k / 10.0 - 0.05 - v) / eta);
      }
      const double freq = counts[static_cast<std::size_t>(k)] / double(n);
      const double se = std::sqrt(std::max(p * (1 - p), 1e-9) / n);
      CHECK(std::abs(freq - p) < 4.0 * se + 1e-3);
    }
  }

  TEST_CASE("sft dataset file round-trips") {
    std::vector<SftExample> data(3);
    RngStream rng(31);
    for (auto& ex : data) {
      const MdpState s = make_state({rng.uniform_int(5)}, {});
      ex.context = build_context(s, IccHint{rng.uniform(), 0.9}, 0, true, kVocab);
      ex.target = synthesize_sft_trace(s, TaskSpec{5, 1, {}, 0}, rng.uniform(), 0.0, rng, kVocab);
    }
    const std::filesystem::path path =
        std::filesystem::temp_directory_path() / "genac_sft_roundtrip.txt";
    write_sft_dataset(path, data);
    const std::vector<SftExample> back = read_sft_dataset(path);
    REQUIRE(back.size() == data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
      CHECK(back[i].context.tokens == data[i].context.tokens);
      CHECK(back[i].target == data[i].target);
    }
    std::filesystem::remove(path);
  }

  TEST_CASE("sft overfits a single repeated example") {
    RngStream rng(37);
    SeqModel m = SeqModel::random_init(critic_dims(kVocab, 20, 8, 0), 0.1, rng);
    SftExample ex;
    ex.context = build_context(make_state({1, 2}, {3}), IccHint{0.3, 0.9}, 1, true, kVocab);
    ex.target = {kVocab.reason(1), kVocab.reason(1), kVocab.score(3), kVocab.eot()};
    const std::vector<SftExample> data(8, ex);

    SftFitConfig cfg;
    cfg.lr = 0.5;
    cfg.epochs = 150;
    cfg.minibatch = 8;
    const SftFitResult r = sft_fit(m, data, cfg);
    CHECK(r.nll_curve.back() < 0.05);
    CHECK(r.nll_curve.back() < r.nll_curve.front());

    const CriticTrace decoded = gen_trace(m, ex.context, 8, DecodeMode::greedy, nullptr, kVocab);
    CHECK(decoded.tokens == ex.target);
  }

  TEST_CASE("zero-parameter sigmoid critic predicts one half") {
    DiscriminativeCritic c(ModelDims{5, 4, 6, 0, 12}, true);
    CHECK(c.predict(std::vector<int>{0, 1, 2}) == 0.5);
    CHECK(c.predict(std::vector<int>{4}) == 0.5);
  }

  TEST_CASE("disc critic fits a constant target") {
    RngStream rng(41);
    DiscriminativeCritic c =
        DiscriminativeCritic::random_init(ModelDims{5, 3, 6, 0, 10}, true, 0.1, rng);
    std::vector<DiscSample> data;
    for (int i = 0; i < 20; ++i) {
      DiscSample s;
      s.state_tokens = {rng.uniform_int(5), rng.uniform_int(5)};
      s.target = 0.3;
      data.push_back(std::move(s));
    }
    DiscFitConfig cfg;
    cfg.lr = 0.5;
    cfg.steps = 800;
    const DiscFitResult r = disc_fit(c, data, cfg);
    for (const auto& s : data) CHECK(std::abs(c.predict(s.state_tokens) - 0.3) < 0.02);
    CHECK(r.final_mse < 1e-3);
  }

  TEST_CASE("disc critic reaches tiny error on a realizable dataset") {
    RngStream rng(43);
    const ModelDims dims{4, 3, 8, 0, 10};
    const DiscriminativeCritic teacher =
        DiscriminativeCritic::random_init(dims, true, 0.4, rng);
    std::vector<DiscSample> data;
    for (int i = 0; i < 40; ++i) {
      DiscSample s;
      const int len = 1 + rng.uniform_int(4);
      for (int j = 0; j < len; ++j) s.state_tokens.push_back(rng.uniform_int(4));
      s.target = teacher.predict(s.state_tokens);
      data.push_back(std::move(s));
    }
    DiscriminativeCritic student = DiscriminativeCritic::random_init(dims, true, 0.2, rng);
    DiscFitConfig cfg;
    cfg.lr = 1.0;
    cfg.steps = 6000;
    cfg.minibatch = 40;
    const DiscFitResult r = disc_fit(student, data, cfg);
    CHECK(r.final_mse < 1e-3);
  }

  TEST_CASE("disc critic mse gradient matches finite differences") {
    RngStream rng(47);
    for (const bool sigmoid : {true, false}) {
      DiscriminativeCritic c =
          DiscriminativeCritic::random_init(ModelDims{4, 2, 5, 3, 8}, sigmoid, 0.5, rng);
      const std::vector<int> tokens = {1, 3, 0};
      const double target = 0.7;
      GradientVector analytic(static_cast<std::size_t>(c.param_count()), 0.0);
      c.accumulate_mse_grad(tokens, target, 1.0, analytic);
      const std::vector<double> fd = finite_difference_grad(c.mutable_params(), [&] {
        const double v = c.predict(tokens);
        return (v - target) * (v - target);
      });
      CHECK(gradients_match(analytic, fd));
    }
  }

  TEST_CASE("disc fit drives all-zero targets to zero error") {
    RngStream rng(53);
    DiscriminativeCritic c =
        DiscriminativeCritic::random_init(ModelDims{3, 2, 4, 0, 8}, true, 0.2, rng);
    std::vector<DiscSample> data;
    for (int i = 0; i < 10; ++i)
      data.push_back(DiscSample{{rng.uniform_int(3), rng.uniform_int(3)}, 0.0});
    DiscFitConfig cfg;
    cfg.lr = 1.0;
    cfg.steps = 2000;
    const DiscFitResult r = disc_fit(c, data, cfg);
    CHECK(r.final_mse < 1e-4);
  }
}
