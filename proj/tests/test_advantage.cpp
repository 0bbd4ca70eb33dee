#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "genac/advantage.hpp"
#include "genac/rng.hpp"

using namespace genac;

namespace {

// Independent direct-summation implementation of the GAE double sum,
//   A_t = sum_{k=0}^{T-t-1} (gamma*lambda)^k (r_{t+k} + gamma*v_{t+k+1} - v_{t+k}),
// kept deliberately naive as the oracle for the production recursion.
std::vector<double> gae_direct(const std::vector<double>& r, const std::vector<double>& v,
                               double gamma, double lambda) {
  const int n = static_cast<int>(r.size());
  std::vector<double> adv(static_cast<std::size_t>(n), 0.0);
  for (int t = 0; t < n; ++t) {
    double acc = 0.0;
    for (int k = 0; t + k < n; ++k) {
      const double delta = r[static_cast<std::size_t>(t + k)] +
                           gamma * v[static_cast<std::size_t>(t + k + 1)] -
                           v[static_cast<std::size_t>(t + k)];
      acc += std::pow(gamma * lambda, k) * delta;
    }
    adv[static_cast<std::size_t>(t)] = acc;
  }
  return adv;
}

}  // namespace

TEST_SUITE("advantage") {
  TEST_CASE("gae with gamma=lambda=1 and a terminal-only reward is exactly r - v") {
    const std::vector<double> rewards = {0.0, 0.0, 0.0, 1.0};
    const std::vector<double> values = {0.2, 0.5, 0.9, 0.3, 0.0};
    const AdvantageVector adv = gae(rewards, values, 1.0, 1.0);
    for (int t = 0; t < 4; ++t)
      CHECK(adv[static_cast<std::size_t>(t)] == 1.0 - values[static_cast<std::size_t>(t)]);
    // The telescoped sum A_t + v_t is constant in t and equals r, exactly.
    for (int t = 0; t < 4; ++t)
      CHECK(adv[static_cast<std::size_t>(t)] + values[static_cast<std::size_t>(t)] == 1.0);
  }

  TEST_CASE("gae is zero on zero rewards and zero values") {
    const std::vector<double> rewards(3, 0.0);
    const std::vector<double> values(4, 0.0);
    for (const double a : gae(rewards, values, 0.9, 0.7)) CHECK(a == 0.0);
  }

  TEST_CASE("gae matches the direct double-sum oracle") {
    const std::vector<double> rewards = {0.0, 0.0, 1.0};
    const std::vector<double> values = {0.2, 0.5, 0.9, 0.0};
    const AdvantageVector adv = gae(rewards, values, 0.9, 0.8);
    const std::vector<double> oracle = gae_direct(rewards, values, 0.9, 0.8);
    for (int t = 0; t < 3; ++t)
      CHECK(adv[static_cast<std::size_t>(t)] ==
            doctest::Approx(oracle[static_cast<std::size_t>(t)]).epsilon(1e-12));
  }

  TEST_CASE("gae matches the oracle on random instances, all lambda regimes") {
    RngStream rng(5);
    for (int trial = 0; trial < 50; ++trial) {
      const int n = 1 + rng.uniform_int(8);
      std::vector<double> rewards(static_cast<std::size_t>(n));
      std::vector<double> values(static_cast<std::size_t>(n) + 1);
      for (double& x : rewards) x = rng.gaussian();
      for (double& x : values) x = rng.gaussian();
      const double gamma = trial % 3 == 0 ? 1.0 : rng.uniform();
      const double lambda = trial % 2 == 0 ? 1.0 : rng.uniform();
      const AdvantageVector adv = gae(rewards, values, gamma, lambda);
      const std::vector<double> oracle = gae_direct(rewards, values, gamma, lambda);
      for (int t = 0; t < n; ++t)
        CHECK(adv[static_cast<std::size_t>(t)] ==
              doctest::Approx(oracle[static_cast<std::size_t>(t)]).epsilon(1e-10));
    }
  }

  TEST_CASE("gae input validation") {
    const std::vector<double> r(3, 0.0);
    const std::vector<double> v(3, 0.0);  // missing bootstrap
    CHECK_THROWS_AS((void)gae(r, v, 1.0, 1.0), std::invalid_argument);
    const std::vector<double> v4(4, 0.0);
    CHECK_THROWS_AS((void)gae(r, v4, 1.5, 1.0), std::invalid_argument);
    CHECK_THROWS_AS((void)gae(r, v4, 1.0, -0.1), std::invalid_argument);
  }

  TEST_CASE("grpo two-point groups normalize to +1/-1") {
    const std::vector<double> adv = grpo_advantages(std::vector<double>{1.0, 0.0});
    CHECK(adv[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(adv[1] == doctest::Approx(-1.0).epsilon(1e-12));
  }

  TEST_CASE("grpo degenerate groups give zero advantages") {
    for (const double r : {0.0, 1.0, 0.37}) {
      const std::vector<double> adv = grpo_advantages(std::vector<double>(8, r));
      for (const double a : adv) CHECK(a == 0.0);
    }
  }

  TEST_CASE("grpo table-sized group matches an independent recomputation") {
    const std::vector<double> rewards = {1, 1, 0, 0, 0, 0, 0, 0};
    const std::vector<double> adv = grpo_advantages(rewards);
    // Direct mean/std computation.
    const double mean = 0.25;
    double var = 0.0;
    for (const double r : rewards) var += (r - mean) * (r - mean);
    const double sd = std::sqrt(var / 8.0);
    for (int i = 0; i < 8; ++i)
      CHECK(adv[static_cast<std::size_t>(i)] ==
            doctest::Approx((rewards[static_cast<std::size_t>(i)] - mean) / sd).epsilon(1e-12));
    CHECK(adv[0] == doctest::Approx(0.75 / sd).epsilon(1e-12));
  }

  TEST_CASE("grpo properties on random groups") {
    RngStream rng(7);
    for (int trial = 0; trial < 100; ++trial) {
      const int g = 2 + rng.uniform_int(9);
      std::vector<double> rewards(static_cast<std::size_t>(g));
      for (double& r : rewards) r = rng.uniform_int(2);
      const std::vector<double> adv = grpo_advantages(rewards);

      double mean = 0.0, var = 0.0, rmean = 0.0;
      for (const double a : adv) mean += a;
      mean /= g;
      for (const double a : adv) var += (a - mean) * (a - mean);
      var /= g;
      for (const double r : rewards) rmean += r;
      rmean /= g;

      CHECK(std::abs(mean) < 1e-9);
      const bool degenerate = [&] {
        for (const double r : rewards)
          if (r != rewards[0]) return false;
        return true;
      }();
      if (!degenerate) CHECK(std::sqrt(var) == doctest::Approx(1.0).epsilon(1e-9));

      // Shift invariance and sign pattern.
      std::vector<double> shifted = rewards;
      for (double& r : shifted) r += 3.25;
      const std::vector<double> adv2 = grpo_advantages(shifted);
      for (int i = 0; i < g; ++i) {
        CHECK(adv2[static_cast<std::size_t>(i)] ==
              doctest::Approx(adv[static_cast<std::size_t>(i)]).epsilon(1e-9));
        const double diff = rewards[static_cast<std::size_t>(i)] - rmean;
        if (diff > 1e-12) CHECK(adv[static_cast<std::size_t>(i)] > 0.0);
        if (diff < -1e-12) CHECK(adv[static_cast<std::size_t>(i)] < 0.0);
      }
    }
  }

  TEST_CASE("rloo golden values") {
    const std::vector<double> a2 = rloo_advantages(std::vector<double>{1.0, 0.0});
    CHECK(a2[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(a2[1] == doctest::Approx(-1.0).epsilon(1e-12));

    const std::vector<double> a4 = rloo_advantages(std::vector<double>{1.0, 0.0, 0.0, 1.0});
    CHECK(a4[0] == doctest::Approx(2.0 / 3).epsilon(1e-12));
    CHECK(a4[1] == doctest::Approx(-2.0 / 3).epsilon(1e-12));
    CHECK(a4[2] == doctest::Approx(-2.0 / 3).epsilon(1e-12));
    CHECK(a4[3] == doctest::Approx(2.0 / 3).epsilon(1e-12));
  }

  TEST_CASE("rloo matches a brute-force leave-one-out loop and is zero-sum") {
    RngStream rng(9);
    for (int trial = 0; trial < 100; ++trial) {
      const int g = 2 + rng.uniform_int(9);
      std::vector<double> rewards(static_cast<std::size_t>(g));
      for (double& r : rewards) r = rng.uniform();
      const std::vector<double> adv = rloo_advantages(rewards);

      double sum = 0.0, rmean = 0.0;
      for (int i = 0; i < g; ++i) {
        double others = 0.0;
        for (int j = 0; j < g; ++j)
          if (j != i) others += rewards[static_cast<std::size_t>(j)];
        CHECK(adv[static_cast<std::size_t>(i)] ==
              doctest::Approx(rewards[static_cast<std::size_t>(i)] - others / (g - 1))
                  .epsilon(1e-12));
        sum += adv[static_cast<std::size_t>(i)];
        rmean += rewards[static_cast<std::size_t>(i)];
      }
      rmean /= g;
      CHECK(std::abs(sum) < 1e-9);

      // Algebraic identity: A_i = G/(G-1) (r_i - mean).
      for (int i = 0; i < g; ++i)
        CHECK(adv[static_cast<std::size_t>(i)] ==
              doctest::Approx(g / double(g - 1) * (rewards[static_cast<std::size_t>(i)] - rmean))
                  .epsilon(1e-9));

      // Shift invariance.
      std::vector<double> shifted = rewards;
      for (double& r : shifted) r -= 1.75;
      const std::vector<double> adv2 = rloo_advantages(shifted);
      for (int i = 0; i < g; ++i)
        CHECK(adv2[static_cast<std::size_t>(i)] ==
              doctest::Approx(adv[static_cast<std::size_t>(i)]).epsilon(1e-9));
    }
  }

  TEST_CASE("group estimators reject singletons") {
    CHECK_THROWS_AS((void)grpo_advantages(std::vector<double>{1.0}), std::invalid_argument);
    CHECK_THROWS_AS((void)rloo_advantages(std::vector<double>{1.0}), std::invalid_argument);
  }

  TEST_CASE("fixed-length segmentation") {
    const std::vector<int> resp7 = {0, 1, 2, 3, 4, 5, 6};
    CHECK(segment(resp7, SegmentRule::fixed(3)).lengths == std::vector<int>{3, 3, 1});
    const std::vector<int> resp3 = {0, 1, 2};
    CHECK(segment(resp3, SegmentRule::fixed(5)).lengths == std::vector<int>{3});
    CHECK_THROWS_AS((void)segment(std::vector<int>{}, SegmentRule::fixed(2)),
                    std::invalid_argument);
  }

  TEST_CASE("delimiter segmentation ends segments at the delimiter") {
    const std::vector<int> resp = {4, 9, 1, 9, 2, 2};
    const Segmentation seg = segment(resp, SegmentRule::delimiter(9));
    CHECK(seg.lengths == std::vector<int>{2, 2, 2});
    const std::vector<int> no_delim = {1, 2, 3};
    CHECK(segment(no_delim, SegmentRule::delimiter(9)).lengths == std::vector<int>{3});
  }

  TEST_CASE("segmentation partitions exactly") {
    RngStream rng(11);
    for (int trial = 0; trial < 50; ++trial) {
      const int n = 1 + rng.uniform_int(12);
      std::vector<int> resp(static_cast<std::size_t>(n));
      for (int& t : resp) t = rng.uniform_int(5);
      const SegmentRule rule = trial % 2 == 0 ? SegmentRule::fixed(1 + rng.uniform_int(4))
                                              : SegmentRule::delimiter(rng.uniform_int(5));
      const Segmentation seg = segment(resp, rule);
      CHECK(seg.total() == n);
      for (const int len : seg.lengths) CHECK(len >= 1);
      const std::vector<int> bounds = seg.boundaries();
      for (std::size_t i = 1; i < bounds.size(); ++i) CHECK(bounds[i] > bounds[i - 1]);
      CHECK(bounds.back() == n);
    }
  }

  TEST_CASE("broadcast goldens") {
    CHECK(broadcast(std::vector<double>{0.6, 0.1}, std::vector<int>{3, 2}) ==
          std::vector<double>{0.6, 0.6, 0.6, 0.1, 0.1});
    CHECK(broadcast(std::vector<double>{0.4}, std::vector<int>{4}) ==
          std::vector<double>(4, 0.4));
    CHECK(broadcast(std::vector<double>{0.1, 0.2, 0.3}, std::vector<int>{1, 1, 1}) ==
          std::vector<double>{0.1, 0.2, 0.3});
    CHECK_THROWS_AS((void)broadcast(std::vector<double>{0.1}, std::vector<int>{1, 2}),
                    std::invalid_argument);
  }

  TEST_CASE("broadcast is piecewise constant and length preserving") {
    RngStream rng(13);
    for (int trial = 0; trial < 50; ++trial) {
      const int k = 1 + rng.uniform_int(5);
      std::vector<double> values(static_cast<std::size_t>(k));
      std::vector<int> lengths(static_cast<std::size_t>(k));
      int total = 0;
      for (int i = 0; i < k; ++i) {
        values[static_cast<std::size_t>(i)] = rng.uniform();
        lengths[static_cast<std::size_t>(i)] = 1 + rng.uniform_int(4);
        total += lengths[static_cast<std::size_t>(i)];
      }
      const std::vector<double> out = broadcast(values, lengths);
      CHECK(static_cast<int>(out.size()) == total);
      int pos = 0;
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < lengths[static_cast<std::size_t>(i)]; ++j)
          CHECK(out[static_cast<std::size_t>(pos++)] == values[static_cast<std::size_t>(i)]);
    }
  }
}
