// Microbenchmarks for the planning hot paths: policy evaluation, regret
// matching, reward mixing, gridworld expansion and reward-model training.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "cautious/gridworld.hpp"
#include "cautious/kofn.hpp"
#include "cautious/mdp.hpp"
#include "cautious/mlp.hpp"
#include "cautious/policy_eval.hpp"
#include "cautious/regret_matching.hpp"

using namespace cautious;

namespace {

std::vector<double> random_row(std::mt19937_64& engine, std::size_t n) {
  std::uniform_real_distribution<double> unit(0.05, 1.0);
  std::vector<double> row(n);
  double total = 0.0;
  for (auto& x : row) total += x = unit(engine);
  for (auto& x : row) x /= total;
  return row;
}

TabularMdp bench_mdp(std::size_t n_states, std::size_t n_actions, double discount) {
  std::mt19937_64 engine(1234);
  TabularMdp mdp;
  mdp.n_states = n_states;
  mdp.n_actions = n_actions;
  mdp.discount = discount;
  mdp.transition = Tensor3(n_states, n_actions, n_states);
  for (std::size_t s = 0; s < n_states; ++s) {
    for (std::size_t a = 0; a < n_actions; ++a) {
      const auto row = random_row(engine, n_states);
      auto dst = mdp.transition.slice(s, a);
      for (std::size_t t = 0; t < n_states; ++t) dst[t] = row[t];
    }
  }
  mdp.initial_dist = random_row(engine, n_states);
  return mdp;
}

RewardTable bench_reward(std::size_t n_states, std::size_t n_actions) {
  std::mt19937_64 engine(99);
  std::uniform_real_distribution<double> value(-1.0, 1.0);
  RewardTable table;
  table.bound = 1.0;
  table.values = Tensor3(n_states, n_actions, n_states);
  for (std::size_t i = 0; i < table.values.size(); ++i) table.values.data()[i] = value(engine);
  return table;
}

void policy_eval_iterative(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const TabularMdp mdp = bench_mdp(n, 4, 0.99);
  const RewardTable reward = bench_reward(n, 4);
  const StationaryPolicy policy = uniform_policy(mdp);
  for (auto _ : state) {
    benchmark::DoNotOptimize(evaluate_policy(mdp, reward, policy, 1e-8));
  }
}
BENCHMARK(policy_eval_iterative)->Arg(16)->Arg(64)->Arg(144);

void policy_eval_exact(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const TabularMdp mdp = bench_mdp(n, 4, 0.99);
  const RewardTable reward = bench_reward(n, 4);
  const StationaryPolicy policy = uniform_policy(mdp);
  for (auto _ : state) {
    benchmark::DoNotOptimize(evaluate_policy_exact(mdp, reward, policy));
  }
}
BENCHMARK(policy_eval_exact)->Arg(16)->Arg(64)->Arg(144)->Arg(400);

void linear_system_resolve(benchmark::State& state) {
  // One factorization valuing many reward tables, the k-of-N inner loop.
  const auto n = static_cast<std::size_t>(state.range(0));
  const TabularMdp mdp = bench_mdp(n, 4, 0.99);
  const StationaryPolicy policy = uniform_policy(mdp);
  const PolicyLinearSystem system(mdp, policy);
  const RewardTable reward = bench_reward(n, 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(system.solve(reward));
  }
}
BENCHMARK(linear_system_resolve)->Arg(64)->Arg(144)->Arg(400);

void regret_matcher_round(benchmark::State& state) {
  const auto n_actions = static_cast<std::size_t>(state.range(0));
  RegretMatcher matcher(n_actions);
  std::mt19937_64 engine(5);
  std::uniform_real_distribution<double> value(-1.0, 1.0);
  std::vector<double> values(n_actions);
  for (auto _ : state) {
    for (auto& v : values) v = value(engine);
    matcher.observe(values);
    benchmark::DoNotOptimize(matcher.current_policy());
  }
}
BENCHMARK(regret_matcher_round)->Arg(5)->Arg(11);

void worst_k_selection(benchmark::State& state) {
  std::mt19937_64 engine(6);
  std::uniform_real_distribution<double> value(-1.0, 1.0);
  std::vector<double> values(20);
  for (auto& v : values) v = value(engine);
  for (auto _ : state) {
    benchmark::DoNotOptimize(worst_k_positions(values, 5));
  }
}
BENCHMARK(worst_k_selection);

void reward_mixing(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<RewardTable> members;
  for (int i = 0; i < 5; ++i) members.push_back(bench_reward(n, 5));
  std::vector<const RewardTable*> parts;
  for (const auto& member : members) parts.push_back(&member);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mix_rewards(parts));
  }
}
BENCHMARK(reward_mixing)->Arg(144)->Arg(400);

void gridworld_expansion(benchmark::State& state) {
  const GridConfig config = novel_grid();
  for (auto _ : state) {
    benchmark::DoNotOptimize(to_tabular_mdp(config));
  }
}
BENCHMARK(gridworld_expansion);

void gridworld_successor_rows(benchmark::State& state) {
  const GridConfig config = novel_grid();
  const auto states = enumerate_states(config);
  for (auto _ : state) {
    for (const auto& s : states) {
      benchmark::DoNotOptimize(successors(config, s, DriveAction::kCruise));
    }
  }
}
BENCHMARK(gridworld_successor_rows);

void mlp_train_epoch(benchmark::State& state) {
  std::mt19937_64 engine(7);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<TrainExample> dataset(256);
  for (auto& example : dataset) {
    example.features.resize(8);
    for (auto& x : example.features) x = gauss(engine);
    example.target = {gauss(engine)};
  }
  TrainConfig config;
  config.epochs = 1;
  config.hidden_dim = 32;
  for (auto _ : state) {
    benchmark::DoNotOptimize(train(dataset, config));
  }
}
BENCHMARK(mlp_train_epoch);

}  // namespace

BENCHMARK_MAIN();
