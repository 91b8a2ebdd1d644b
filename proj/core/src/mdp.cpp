#include "cautious/mdp.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace cautious {

std::string ValidationReport::joined() const {
  std::string out;
  for (std::size_t i = 0; i < violations.size(); ++i) {
    if (i) out += "; ";
    out += violations[i];
  }
  return out;
}

namespace {

std::string fmt(const char* what, std::size_t s, std::size_t a, double value) {
  std::ostringstream os;
  os << what << " at state " << s << " action " << a << " (got " << value << ")";
  return os.str();
}

}  // namespace

ValidationReport validate_mdp(const TabularMdp& mdp) {
  ValidationReport report;
  if (mdp.n_states == 0) report.violations.push_back("n_states must be positive");
  if (mdp.n_actions == 0) report.violations.push_back("n_actions must be positive");
  if (!(mdp.discount >= 0.0 && mdp.discount < 1.0)) {
    std::ostringstream os;
    os << "discount must lie in [0, 1) (got " << mdp.discount << ")";
    report.violations.push_back(os.str());
  }
  if (mdp.transition.dim0() != mdp.n_states || mdp.transition.dim1() != mdp.n_actions ||
      mdp.transition.dim2() != mdp.n_states) {
    report.violations.push_back("transition tensor shape does not match (n_states, n_actions, n_states)");
    return report;  // further checks would index out of range
  }
  if (mdp.initial_dist.size() != mdp.n_states) {
    report.violations.push_back("initial distribution length does not match n_states");
    return report;
  }

  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      double row_sum = 0.0;
      for (std::size_t t = 0; t < mdp.n_states; ++t) {
        const double p = mdp.transition(s, a, t);
        if (p < 0.0) {
          report.violations.push_back(fmt("negative transition probability", s, a, p));
        }
        row_sum += p;
      }
      if (std::abs(row_sum - 1.0) > kProbabilityTolerance) {
        report.violations.push_back(fmt("transition row does not sum to 1", s, a, row_sum));
      }
    }
  }

  double init_sum = 0.0;
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    const double p = mdp.initial_dist[s];
    if (p < 0.0) {
      std::ostringstream os;
      os << "negative initial probability at state " << s << " (got " << p << ")";
      report.violations.push_back(os.str());
    }
    init_sum += p;
  }
  if (std::abs(init_sum - 1.0) > kProbabilityTolerance) {
    std::ostringstream os;
    os << "initial distribution does not sum to 1 (got " << init_sum << ")";
    report.violations.push_back(os.str());
  }
  return report;
}

ValidationReport validate_reward(const TabularMdp& mdp, const RewardTable& reward) {
  ValidationReport report;
  if (reward.values.dim0() != mdp.n_states || reward.values.dim1() != mdp.n_actions ||
      reward.values.dim2() != mdp.n_states) {
    report.violations.push_back("reward tensor shape does not match (n_states, n_actions, n_states)");
    return report;
  }
  if (!(reward.bound >= 0.0) || !std::isfinite(reward.bound)) {
    report.violations.push_back("reward bound must be finite and non-negative");
  }
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      for (std::size_t t = 0; t < mdp.n_states; ++t) {
        const double r = reward.values(s, a, t);
        if (!std::isfinite(r)) {
          report.violations.push_back(fmt("non-finite reward", s, a, r));
        } else if (std::abs(r) > reward.bound) {
          report.violations.push_back(fmt("reward exceeds stated bound", s, a, r));
        }
      }
    }
  }
  return report;
}

ValidationReport validate_policy(const TabularMdp& mdp, const StationaryPolicy& policy) {
  ValidationReport report;
  if (policy.probs.rows() != mdp.n_states || policy.probs.cols() != mdp.n_actions) {
    report.violations.push_back("policy shape does not match (n_states, n_actions)");
    return report;
  }
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    double row_sum = 0.0;
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      const double p = policy.probs(s, a);
      if (p < 0.0) {
        report.violations.push_back(fmt("negative action probability", s, a, p));
      }
      row_sum += p;
    }
    if (std::abs(row_sum - 1.0) > kProbabilityTolerance) {
      std::ostringstream os;
      os << "policy row does not sum to 1 at state " << s << " (got " << row_sum << ")";
      report.violations.push_back(os.str());
    }
  }
  return report;
}

StationaryPolicy uniform_policy(const TabularMdp& mdp) {
  StationaryPolicy policy{Matrix(mdp.n_states, mdp.n_actions)};
  const double p = 1.0 / static_cast<double>(mdp.n_actions);
  for (std::size_t i = 0; i < policy.probs.size(); ++i) policy.probs.data()[i] = p;
  return policy;
}

Matrix expected_reward(const TabularMdp& mdp, const RewardTable& reward) {
  if (reward.values.dim0() != mdp.n_states || reward.values.dim1() != mdp.n_actions ||
      reward.values.dim2() != mdp.n_states) {
    throw std::invalid_argument("expected_reward: reward shape does not match MDP");
  }
  Matrix out(mdp.n_states, mdp.n_actions);
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      double acc = 0.0;
      for (std::size_t t = 0; t < mdp.n_states; ++t) {
        acc += mdp.transition(s, a, t) * reward.values(s, a, t);
      }
      out(s, a) = acc;
    }
  }
  return out;
}

}  // namespace cautious
