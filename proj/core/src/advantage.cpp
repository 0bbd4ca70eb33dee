#include "genac/advantage.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace genac {

AdvantageVector gae(std::span<const double> rewards, std::span<const double> values,
                    double gamma, double lambda) {
  const int n = static_cast<int>(rewards.size());
  if (static_cast<int>(values.size()) != n + 1)
    throw std::invalid_argument("gae: need one value per step plus the bootstrap");
  if (gamma < 0.0 || gamma > 1.0) throw std::invalid_argument("gae: gamma must be in [0,1]");
  if (lambda < 0.0 || lambda > 1.0) throw std::invalid_argument("gae: lambda must be in [0,1]");

  AdvantageVector adv(static_cast<std::size_t>(n));
  if (lambda == 1.0) {
    // Telescoped form: A_t = sum_k gamma^k r_{t+k} + gamma^(T-t) v_T - v_t.
    double suffix = values[static_cast<std::size_t>(n)];
    for (int t = n - 1; t >= 0; --t) {
      suffix = rewards[static_cast<std::size_t>(t)] + gamma * suffix;
      adv[static_cast<std::size_t>(t)] = suffix - values[static_cast<std::size_t>(t)];
    }
  } else {
    const double gl = gamma * lambda;
    double acc = 0.0;
    for (int t = n - 1; t >= 0; --t) {
      const double delta = rewards[static_cast<std::size_t>(t)] +
                           gamma * values[static_cast<std::size_t>(t + 1)] -
                           values[static_cast<std::size_t>(t)];
      acc = delta + gl * acc;
      adv[static_cast<std::size_t>(t)] = acc;
    }
  }
  return adv;
}

std::vector<double> grpo_advantages(std::span<const double> group_rewards) {
  const int g = static_cast<int>(group_rewards.size());
  if (g < 2) throw std::invalid_argument("grpo_advantages: group size must be >= 2");

  double mean = 0.0;
  for (const double r : group_rewards) mean += r;
  mean /= g;
  double var = 0.0;
  for (const double r : group_rewards) var += (r - mean) * (r - mean);
  var /= g;  // population variance
  const double sd = std::sqrt(var);

  std::vector<double> adv(static_cast<std::size_t>(g), 0.0);
  if (sd == 0.0) return adv;  // degenerate group: skip normalization
  for (int i = 0; i < g; ++i)
    adv[static_cast<std::size_t>(i)] = (group_rewards[static_cast<std::size_t>(i)] - mean) / sd;
  return adv;
}

std::vector<double> rloo_advantages(std::span<const double> group_rewards) {
  const int g = static_cast<int>(group_rewards.size());
  if (g < 2) throw std::invalid_argument("rloo_advantages: group size must be >= 2");

  double sum = 0.0;
  for (const double r : group_rewards) sum += r;

  std::vector<double> adv(static_cast<std::size_t>(g));
  for (int i = 0; i < g; ++i) {
    const double r = group_rewards[static_cast<std::size_t>(i)];
    adv[static_cast<std::size_t>(i)] = r - (sum - r) / (g - 1);
  }
  return adv;
}

int Segmentation::total() const {
  int t = 0;
  for (const int len : lengths) t += len;
  return t;
}

std::vector<int> Segmentation::boundaries() const {
  std::vector<int> b(lengths.size());
  int acc = 0;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    acc += lengths[i];
    b[i] = acc;
  }
  return b;
}

int Segmentation::segment_of(int t) const {
  int acc = 0;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    acc += lengths[i];
    if (t < acc) return static_cast<int>(i);
  }
  throw std::out_of_range("Segmentation::segment_of: token index " + std::to_string(t));
}

Segmentation segment(std::span<const int> response, const SegmentRule& rule) {
  if (response.empty()) throw std::invalid_argument("segment: response must be non-empty");
  Segmentation seg;
  if (rule.kind == SegmentRule::Kind::fixed) {
    if (rule.fixed_len < 1) throw std::invalid_argument("segment: fixed length must be >= 1");
    int rem = static_cast<int>(response.size());
    while (rem > 0) {
      const int len = rem < rule.fixed_len ? rem : rule.fixed_len;
      seg.lengths.push_back(len);
      rem -= len;
    }
  } else {
    int current = 0;
    for (const int tok : response) {
      ++current;
      if (tok == rule.delimiter_token) {
        seg.lengths.push_back(current);
        current = 0;
      }
    }
    if (current > 0) seg.lengths.push_back(current);
  }
  return seg;
}

std::vector<double> broadcast(std::span<const double> segment_values,
                              std::span<const int> segment_lengths) {
  if (segment_values.size() != segment_lengths.size())
    throw std::invalid_argument("broadcast: one value per segment required");
  std::vector<double> out;
  for (std::size_t k = 0; k < segment_values.size(); ++k) {
    if (segment_lengths[k] < 1)
      throw std::invalid_argument("broadcast: segment lengths must be >= 1");
    out.insert(out.end(), static_cast<std::size_t>(segment_lengths[k]), segment_values[k]);
  }
  return out;
}

}  // namespace genac
