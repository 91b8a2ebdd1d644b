#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <random>
#include <string>

#include "cautious/mdp.hpp"

namespace test_helpers {

using cautious::Matrix;
using cautious::RewardTable;
using cautious::StationaryPolicy;
using cautious::TabularMdp;
using cautious::Tensor3;

inline std::vector<double> random_distribution(std::mt19937_64& engine, std::size_t n) {
  // Offset keeps every entry strictly positive so policies/transitions have
  // full support.
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> row(n);
  double total = 0.0;
  for (auto& x : row) {
    x = 0.05 + unit(engine);
    total += x;
  }
  for (auto& x : row) x /= total;
  return row;
}

inline TabularMdp random_mdp(std::mt19937_64& engine, std::size_t n_states, std::size_t n_actions,
                             double discount) {
  TabularMdp mdp;
  mdp.n_states = n_states;
  mdp.n_actions = n_actions;
  mdp.discount = discount;
  mdp.transition = Tensor3(n_states, n_actions, n_states);
  for (std::size_t s = 0; s < n_states; ++s) {
    for (std::size_t a = 0; a < n_actions; ++a) {
      const auto row = random_distribution(engine, n_states);
      auto dst = mdp.transition.slice(s, a);
      for (std::size_t t = 0; t < n_states; ++t) dst[t] = row[t];
    }
  }
  mdp.initial_dist = random_distribution(engine, n_states);
  return mdp;
}

inline RewardTable random_reward(std::mt19937_64& engine, std::size_t n_states,
                                 std::size_t n_actions, double bound) {
  std::uniform_real_distribution<double> value(-bound, bound);
  RewardTable table;
  table.bound = bound;
  table.values = Tensor3(n_states, n_actions, n_states);
  for (std::size_t i = 0; i < table.values.size(); ++i) table.values.data()[i] = value(engine);
  return table;
}

inline StationaryPolicy random_policy(std::mt19937_64& engine, std::size_t n_states,
                                      std::size_t n_actions) {
  StationaryPolicy policy{Matrix(n_states, n_actions)};
  for (std::size_t s = 0; s < n_states; ++s) {
    const auto row = random_distribution(engine, n_actions);
    for (std::size_t a = 0; a < n_actions; ++a) policy.probs(s, a) = row[a];
  }
  return policy;
}

inline StationaryPolicy deterministic_policy(std::size_t n_states, std::size_t n_actions,
                                             std::size_t action) {
  StationaryPolicy policy{Matrix(n_states, n_actions)};
  for (std::size_t s = 0; s < n_states; ++s) policy.probs(s, action) = 1.0;
  return policy;
}

/// Fresh directory under the system temp root, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<unsigned> counter{0};
    const auto base = std::filesystem::temp_directory_path();
    path_ = base / ("cautious_" + tag + "_" + std::to_string(::getpid()) + "_" +
                    std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace test_helpers
