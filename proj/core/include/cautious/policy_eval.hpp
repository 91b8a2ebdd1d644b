#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "cautious/mdp.hpp"

namespace cautious {

/// Values are normalized by (1 - discount) so they live on the same scale as
/// single-step rewards: v(s) = (1-g) E[ sum_t g^t r_t | s ]. With discount 0
/// this reduces to the expected immediate reward, which is what makes the
/// contextual-bandit tasks a special case of the same code path.
struct ValueFunction {
  std::vector<double> values;
  double residual = 0.0;   // max-abs change in the final sweep (0 for direct solves)
  std::size_t sweeps = 0;  // number of synchronous sweeps performed
};

inline constexpr double kDefaultEvalTolerance = 1e-6;
inline constexpr std::size_t kMaxEvalSweeps = 1000000;

/// Iterative policy evaluation: synchronous sweeps from v = 0 until the
/// max-abs update falls below `tolerance` (or the sweep cap is hit, in which
/// case the returned residual reports how far convergence got).
ValueFunction evaluate_policy(const TabularMdp& mdp, const RewardTable& reward,
                              const StationaryPolicy& policy,
                              double tolerance = kDefaultEvalTolerance,
                              std::size_t max_sweeps = kMaxEvalSweeps);

/// Same fixed point via a direct linear solve of (I - g P_pi) v = (1-g) r_pi.
/// Exact up to factorization round-off; residual is reported as 0.
ValueFunction evaluate_policy_exact(const TabularMdp& mdp, const RewardTable& reward,
                                    const StationaryPolicy& policy);

/// q(s,a) = sum_s' p(s'|s,a) [ (1-g) r(s,a,s') + g v(s') ].
Matrix q_values(const TabularMdp& mdp, const RewardTable& reward,
                const std::vector<double>& values);

/// Advantage of each action against the policy's own value:
/// rho(s,a) = q(s,a) - sum_b pi(b|s) q(s,b).
Matrix advantages(const Matrix& q, const StationaryPolicy& policy);

/// Start-distribution-weighted value: sum_s d0(s) v(s).
double expected_return(const TabularMdp& mdp, const std::vector<double>& values);

/// Normalized discounted state-occupancy of `policy` from the MDP's initial
/// distribution: d = (1-g) sum_t g^t (P_pi^T)^t d0, solved directly.
std::vector<double> discounted_state_distribution(const TabularMdp& mdp,
                                                  const StationaryPolicy& policy);

/// Deterministic policy putting mass 1 on the argmax of each q row; ties go
/// to the lowest action index.
StationaryPolicy greedy_policy(const Matrix& q);

/// Optimal deterministic policy via policy iteration with exact evaluation.
/// The result is greedy (lowest-index ties) against the optimal values.
StationaryPolicy optimal_policy(const TabularMdp& mdp, const RewardTable& reward);

/// LU factorization of (I - g P_pi), reusable across reward tables for the
/// same policy. Solving for many rewards against one factorization keeps
/// evaluation linear in the reward argument to near machine precision, which
/// the k-of-N loop relies on when it mixes sampled rewards.
class PolicyLinearSystem {
 public:
  PolicyLinearSystem(const TabularMdp& mdp, const StationaryPolicy& policy);
  ~PolicyLinearSystem();
  PolicyLinearSystem(PolicyLinearSystem&&) noexcept;
  PolicyLinearSystem& operator=(PolicyLinearSystem&&) noexcept;

  /// Values of the factorized policy under `reward`.
  std::vector<double> solve(const RewardTable& reward) const;

  /// Same, but from an already-marginalized (state, action) reward matrix.
  std::vector<double> solve_expected(const Matrix& reward_sa) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace cautious
