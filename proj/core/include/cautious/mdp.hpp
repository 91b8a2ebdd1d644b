#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cautious/dense.hpp"

namespace cautious {

/// Tolerance used when validating probability rows at construction time.
/// Iteration-time convergence tolerances are a separate concern (policy_eval).
inline constexpr double kProbabilityTolerance = 1e-12;

/// Finite discounted MDP: states, actions, transition kernel, initial state
/// distribution and discount factor. Rewards live in RewardTable so that a
/// single MDP can be paired with many reward hypotheses.
///
/// Immutable after construction; safe to share across concurrent readers.
struct TabularMdp {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  Tensor3 transition;               // (state, action, next_state)
  std::vector<double> initial_dist; // over states
  double discount = 0.0;            // gamma in [0, 1); 0 covers bandits
};

/// Bounded reward values over (state, action, next_state) triples. The reward
/// is stored densely in the general triple form even when it only depends on
/// a subset of the indices, so every consumer shares one code path.
struct RewardTable {
  Tensor3 values;     // (state, action, next_state)
  double bound = 0.0; // sup over |values|; every entry must lie in [-bound, bound]

  std::size_t n_states() const { return values.dim0(); }
  std::size_t n_actions() const { return values.dim1(); }
};

/// Per-state action distribution.
struct StationaryPolicy {
  Matrix probs; // (state, action)

  std::size_t n_states() const { return probs.rows(); }
  std::size_t n_actions() const { return probs.cols(); }
};

/// Outcome of validate_mdp / validate_reward / validate_policy. Carries every
/// violated invariant with enough indices to locate it.
struct ValidationReport {
  std::vector<std::string> violations;

  bool ok() const { return violations.empty(); }
  std::string joined() const;
};

ValidationReport validate_mdp(const TabularMdp& mdp);
ValidationReport validate_reward(const TabularMdp& mdp, const RewardTable& reward);
ValidationReport validate_policy(const TabularMdp& mdp, const StationaryPolicy& policy);

/// Policy assigning probability 1/n_actions everywhere (CFR's first iterate).
StationaryPolicy uniform_policy(const TabularMdp& mdp);

/// Marginalizes the reward over next states: entry (s,a) = sum_s' p(s'|s,a) r(s,a,s').
/// Throws std::invalid_argument on shape mismatch.
Matrix expected_reward(const TabularMdp& mdp, const RewardTable& reward);

}  // namespace cautious
