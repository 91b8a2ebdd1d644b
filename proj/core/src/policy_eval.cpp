#include "cautious/policy_eval.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace cautious {

namespace {

void check_shapes(const TabularMdp& mdp, const StationaryPolicy& policy) {
  if (policy.probs.rows() != mdp.n_states || policy.probs.cols() != mdp.n_actions) {
    throw std::invalid_argument("policy shape does not match MDP");
  }
}

void check_shapes(const TabularMdp& mdp, const RewardTable& reward) {
  if (reward.values.dim0() != mdp.n_states || reward.values.dim1() != mdp.n_actions ||
      reward.values.dim2() != mdp.n_states) {
    throw std::invalid_argument("reward shape does not match MDP");
  }
}

/// Policy-averaged transition matrix P_pi (s, s').
Eigen::MatrixXd policy_transition(const TabularMdp& mdp, const StationaryPolicy& policy) {
  const auto n = static_cast<Eigen::Index>(mdp.n_states);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      const double w = policy.probs(s, a);
      if (w == 0.0) continue;
      const auto row = mdp.transition.slice(s, a);
      for (std::size_t t = 0; t < mdp.n_states; ++t) {
        p(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t)) += w * row[t];
      }
    }
  }
  return p;
}

/// Policy-averaged normalized one-step reward: (1-g) sum_a pi sum_s' p r.
Eigen::VectorXd policy_reward(const TabularMdp& mdp, const RewardTable& reward,
                              const StationaryPolicy& policy) {
  Eigen::VectorXd r = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mdp.n_states));
  const double scale = 1.0 - mdp.discount;
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    double acc = 0.0;
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      const double w = policy.probs(s, a);
      if (w == 0.0) continue;
      const auto p = mdp.transition.slice(s, a);
      const auto rv = reward.values.slice(s, a);
      double inner = 0.0;
      for (std::size_t t = 0; t < mdp.n_states; ++t) inner += p[t] * rv[t];
      acc += w * inner;
    }
    r(static_cast<Eigen::Index>(s)) = scale * acc;
  }
  return r;
}

}  // namespace

ValueFunction evaluate_policy(const TabularMdp& mdp, const RewardTable& reward,
                              const StationaryPolicy& policy, double tolerance,
                              std::size_t max_sweeps) {
  check_shapes(mdp, policy);
  check_shapes(mdp, reward);

  // Precompute per-state expected one-step reward and the averaged kernel so
  // each sweep is a single matrix-vector product.
  const Eigen::MatrixXd p_pi = policy_transition(mdp, policy);
  const Eigen::VectorXd r_pi = policy_reward(mdp, reward, policy);
  const auto n = static_cast<Eigen::Index>(mdp.n_states);

  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  ValueFunction out;
  out.residual = 0.0;
  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    Eigen::VectorXd next = r_pi + mdp.discount * (p_pi * v);
    out.residual = (next - v).cwiseAbs().maxCoeff();
    v = std::move(next);
    out.sweeps = sweep + 1;
    if (out.residual < tolerance) break;
  }
  out.values.assign(v.data(), v.data() + n);
  return out;
}

struct PolicyLinearSystem::Impl {
  const TabularMdp* mdp;
  StationaryPolicy policy;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu;
};

PolicyLinearSystem::PolicyLinearSystem(const TabularMdp& mdp, const StationaryPolicy& policy)
    : impl_(std::make_unique<Impl>()) {
  check_shapes(mdp, policy);
  impl_->mdp = &mdp;
  impl_->policy = policy;
  const auto n = static_cast<Eigen::Index>(mdp.n_states);
  Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n) - mdp.discount * policy_transition(mdp, policy);
  impl_->lu.compute(system);
}

PolicyLinearSystem::~PolicyLinearSystem() = default;
PolicyLinearSystem::PolicyLinearSystem(PolicyLinearSystem&&) noexcept = default;
PolicyLinearSystem& PolicyLinearSystem::operator=(PolicyLinearSystem&&) noexcept = default;

std::vector<double> PolicyLinearSystem::solve(const RewardTable& reward) const {
  const TabularMdp& mdp = *impl_->mdp;
  check_shapes(mdp, reward);
  const Eigen::VectorXd r_pi = policy_reward(mdp, reward, impl_->policy);
  Eigen::VectorXd v = impl_->lu.solve(r_pi);
  return std::vector<double>(v.data(), v.data() + v.size());
}

std::vector<double> PolicyLinearSystem::solve_expected(const Matrix& reward_sa) const {
  const TabularMdp& mdp = *impl_->mdp;
  if (reward_sa.rows() != mdp.n_states || reward_sa.cols() != mdp.n_actions) {
    throw std::invalid_argument("reward matrix shape does not match MDP");
  }
  const double scale = 1.0 - mdp.discount;
  Eigen::VectorXd r_pi(static_cast<Eigen::Index>(mdp.n_states));
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    double acc = 0.0;
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      acc += impl_->policy.probs(s, a) * reward_sa(s, a);
    }
    r_pi(static_cast<Eigen::Index>(s)) = scale * acc;
  }
  Eigen::VectorXd v = impl_->lu.solve(r_pi);
  return std::vector<double>(v.data(), v.data() + v.size());
}

ValueFunction evaluate_policy_exact(const TabularMdp& mdp, const RewardTable& reward,
                                    const StationaryPolicy& policy) {
  PolicyLinearSystem system(mdp, policy);
  ValueFunction out;
  out.values = system.solve(reward);
  out.residual = 0.0;
  out.sweeps = 0;
  return out;
}

Matrix q_values(const TabularMdp& mdp, const RewardTable& reward,
                const std::vector<double>& values) {
  check_shapes(mdp, reward);
  if (values.size() != mdp.n_states) {
    throw std::invalid_argument("value vector length does not match MDP");
  }
  Matrix q(mdp.n_states, mdp.n_actions);
  const double scale = 1.0 - mdp.discount;
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      const auto p = mdp.transition.slice(s, a);
      const auto r = reward.values.slice(s, a);
      double acc = 0.0;
      for (std::size_t t = 0; t < mdp.n_states; ++t) {
        acc += p[t] * (scale * r[t] + mdp.discount * values[t]);
      }
      q(s, a) = acc;
    }
  }
  return q;
}

Matrix advantages(const Matrix& q, const StationaryPolicy& policy) {
  if (!q.same_shape(policy.probs)) {
    throw std::invalid_argument("q and policy shapes differ");
  }
  Matrix rho(q.rows(), q.cols());
  for (std::size_t s = 0; s < q.rows(); ++s) {
    double v = 0.0;
    for (std::size_t a = 0; a < q.cols(); ++a) v += policy.probs(s, a) * q(s, a);
    for (std::size_t a = 0; a < q.cols(); ++a) rho(s, a) = q(s, a) - v;
  }
  return rho;
}

double expected_return(const TabularMdp& mdp, const std::vector<double>& values) {
  if (values.size() != mdp.n_states) {
    throw std::invalid_argument("value vector length does not match MDP");
  }
  double acc = 0.0;
  for (std::size_t s = 0; s < mdp.n_states; ++s) acc += mdp.initial_dist[s] * values[s];
  return acc;
}

std::vector<double> discounted_state_distribution(const TabularMdp& mdp,
                                                  const StationaryPolicy& policy) {
  check_shapes(mdp, policy);
  const auto n = static_cast<Eigen::Index>(mdp.n_states);
  const Eigen::MatrixXd p_pi = policy_transition(mdp, policy);
  Eigen::VectorXd d0(n);
  for (std::size_t s = 0; s < mdp.n_states; ++s) d0(static_cast<Eigen::Index>(s)) = mdp.initial_dist[s];
  // d solves (I - g P_pi^T) d = (1-g) d0.
  Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n) - mdp.discount * p_pi.transpose();
  Eigen::VectorXd d = system.partialPivLu().solve((1.0 - mdp.discount) * d0);
  return std::vector<double>(d.data(), d.data() + n);
}

StationaryPolicy greedy_policy(const Matrix& q) {
  StationaryPolicy policy{Matrix(q.rows(), q.cols())};
  for (std::size_t s = 0; s < q.rows(); ++s) {
    std::size_t best = 0;
    for (std::size_t a = 1; a < q.cols(); ++a) {
      if (q(s, a) > q(s, best)) best = a;
    }
    for (std::size_t a = 0; a < q.cols(); ++a) policy.probs(s, a) = (a == best) ? 1.0 : 0.0;
  }
  return policy;
}

StationaryPolicy optimal_policy(const TabularMdp& mdp, const RewardTable& reward) {
  check_shapes(mdp, reward);
  // Howard policy iteration with exact evaluation. Switch a state's action
  // only on strict improvement so exact ties cannot oscillate; on
  // convergence, re-derive the greedy policy so reported ties break to the
  // lowest action index.
  std::vector<std::size_t> actions(mdp.n_states, 0);
  auto as_policy = [&](const std::vector<std::size_t>& acts) {
    StationaryPolicy p{Matrix(mdp.n_states, mdp.n_actions)};
    for (std::size_t s = 0; s < mdp.n_states; ++s) p.probs(s, acts[s]) = 1.0;
    return p;
  };

  for (std::size_t round = 0; round <= mdp.n_states * mdp.n_actions + 1; ++round) {
    const StationaryPolicy current = as_policy(actions);
    const ValueFunction v = evaluate_policy_exact(mdp, reward, current);
    const Matrix q = q_values(mdp, reward, v.values);
    bool changed = false;
    for (std::size_t s = 0; s < mdp.n_states; ++s) {
      std::size_t best = actions[s];
      for (std::size_t a = 0; a < mdp.n_actions; ++a) {
        if (q(s, a) > q(s, best)) best = a;
      }
      if (best != actions[s]) {
        actions[s] = best;
        changed = true;
      }
    }
    if (!changed) return greedy_policy(q);
  }
  throw std::runtime_error("optimal_policy: policy iteration failed to converge");
}

}  // namespace cautious
