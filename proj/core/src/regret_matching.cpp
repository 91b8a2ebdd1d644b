#include "cautious/regret_matching.hpp"

#include <algorithm>
#include <stdexcept>

namespace cautious {

namespace {

/// Shared matching rule: out gets the positive part of `regrets` normalized,
/// or uniform when nothing is positive.
void match_row(const double* regrets, std::size_t n, double* out) {
  double positive_sum = 0.0;
  for (std::size_t a = 0; a < n; ++a) positive_sum += std::max(regrets[a], 0.0);
  if (positive_sum > 0.0) {
    for (std::size_t a = 0; a < n; ++a) out[a] = std::max(regrets[a], 0.0) / positive_sum;
  } else {
    const double u = 1.0 / static_cast<double>(n);
    for (std::size_t a = 0; a < n; ++a) out[a] = u;
  }
}

void accumulate_row(double* regrets, std::size_t n, const double* q) {
  std::vector<double> pi(n);
  match_row(regrets, n, pi.data());
  double baseline = 0.0;
  for (std::size_t a = 0; a < n; ++a) baseline += pi[a] * q[a];
  for (std::size_t a = 0; a < n; ++a) regrets[a] += q[a] - baseline;
}

}  // namespace

RegretMatcher::RegretMatcher(std::size_t n_actions) : regrets_(n_actions, 0.0) {
  if (n_actions == 0) throw std::invalid_argument("RegretMatcher: n_actions must be positive");
}

std::vector<double> RegretMatcher::current_policy() const {
  std::vector<double> pi(regrets_.size());
  match_row(regrets_.data(), regrets_.size(), pi.data());
  return pi;
}

void RegretMatcher::observe(const std::vector<double>& action_values) {
  if (action_values.size() != regrets_.size()) {
    throw std::invalid_argument("RegretMatcher: action value count mismatch");
  }
  accumulate_row(regrets_.data(), regrets_.size(), action_values.data());
  ++rounds_;
}

double RegretMatcher::max_regret() const {
  return *std::max_element(regrets_.begin(), regrets_.end());
}

RegretMatcherBank::RegretMatcherBank(std::size_t n_states, std::size_t n_actions)
    : regrets_(n_states, n_actions) {
  if (n_states == 0 || n_actions == 0) {
    throw std::invalid_argument("RegretMatcherBank: dimensions must be positive");
  }
}

StationaryPolicy RegretMatcherBank::current_policy() const {
  StationaryPolicy policy{Matrix(regrets_.rows(), regrets_.cols())};
  for (std::size_t s = 0; s < regrets_.rows(); ++s) {
    match_row(regrets_.row(s).data(), regrets_.cols(), policy.probs.row(s).data());
  }
  return policy;
}

void RegretMatcherBank::observe(const Matrix& q) {
  if (!q.same_shape(regrets_)) {
    throw std::invalid_argument("RegretMatcherBank: q shape mismatch");
  }
  for (std::size_t s = 0; s < regrets_.rows(); ++s) {
    accumulate_row(regrets_.row(s).data(), regrets_.cols(), q.row(s).data());
  }
  ++rounds_;
}

double RegretMatcherBank::max_regret() const {
  double best = regrets_(0, 0);
  for (std::size_t i = 0; i < regrets_.size(); ++i) best = std::max(best, regrets_.data()[i]);
  return best;
}

}  // namespace cautious
