#pragma once

#include <span>
#include <vector>

namespace genac {

// Per-token advantage estimates aligned to a trajectory's response.
using AdvantageVector = std::vector<double>;

// Generalized advantage estimation:
//   A_t = sum_k (gamma*lambda)^k (r_{t+k} + gamma*v_{t+k+1} - v_{t+k})
// `values` carries one entry per step plus the bootstrap v(s_{T+1}) at the
// back (pass 0 for terminal episodes). For lambda == 1 the TD terms telescope
// and the sum is computed in closed form, so with gamma == 1 and a
// terminal-only reward A_t == r - v_t holds exactly, not just to roundoff.
AdvantageVector gae(std::span<const double> rewards, std::span<const double> values,
                    double gamma, double lambda);

// Group-normalized advantages: (r_i - mean) / population std. A zero-std
// group yields all-zero advantages.
std::vector<double> grpo_advantages(std::span<const double> group_rewards);

// Leave-one-out baseline: A_i = r_i - mean_{j != i} r_j. Always sums to zero.
std::vector<double> rloo_advantages(std::span<const double> group_rewards);

// Partition of a response into contiguous non-empty segments.
struct Segmentation {
  std::vector<int> lengths;

  int count() const { return static_cast<int>(lengths.size()); }
  int total() const;
  // Exclusive end index of each segment; strictly increasing, last == total.
  std::vector<int> boundaries() const;
  // Segment index owning token position t.
  int segment_of(int t) const;
};

struct SegmentRule {
  enum class Kind { fixed, delimiter };
  Kind kind = Kind::fixed;
  int fixed_len = 2;        // fixed: every segment this long except maybe the last
  int delimiter_token = -1; // delimiter: segments end just after this token

  static SegmentRule fixed(int len) { return {Kind::fixed, len, -1}; }
  static SegmentRule delimiter(int token) { return {Kind::delimiter, 0, token}; }
};

Segmentation segment(std::span<const int> response, const SegmentRule& rule);

// Copy each segment's value to all of its tokens.
std::vector<double> broadcast(std::span<const double> segment_values,
                              std::span<const int> segment_lengths);

}  // namespace genac
