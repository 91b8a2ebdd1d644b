#pragma once

#include <cstddef>
#include <vector>

#include "cautious/mdp.hpp"

namespace cautious {

/// Regret matching for a single decision with a fixed action set.
///
/// Each round the caller takes current_policy(), acts with it, then reports
/// the realized action values via observe(). Cumulative regret for action a
/// accrues q(a) - <pi, q>; the next policy is proportional to the positive
/// part of the cumulative regrets, falling back to uniform when no regret is
/// positive (including round one). With |q| <= U the external regret after T
/// rounds is at most 2U sqrt(|A| T).
class RegretMatcher {
 public:
  explicit RegretMatcher(std::size_t n_actions);

  std::vector<double> current_policy() const;

  /// Accumulates regrets against the policy current_policy() would return
  /// right now, i.e. the one the caller just acted with.
  void observe(const std::vector<double>& action_values);

  const std::vector<double>& cumulative_regrets() const { return regrets_; }
  double max_regret() const;
  std::size_t rounds() const { return rounds_; }

 private:
  std::vector<double> regrets_;
  std::size_t rounds_ = 0;
};

/// One RegretMatcher per state, operating on whole (state, action) q tables.
/// This is the policy-update half of the k-of-N loop; the environment half
/// supplies q tables for whichever reward mixture it chose.
class RegretMatcherBank {
 public:
  RegretMatcherBank(std::size_t n_states, std::size_t n_actions);

  StationaryPolicy current_policy() const;
  void observe(const Matrix& q);

  const Matrix& cumulative_regrets() const { return regrets_; }
  /// Largest per-state cumulative regret, maximized over states.
  double max_regret() const;
  std::size_t rounds() const { return rounds_; }

 private:
  Matrix regrets_;  // (state, action)
  std::size_t rounds_ = 0;
};

}  // namespace cautious
