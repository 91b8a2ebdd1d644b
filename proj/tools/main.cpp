// Command-line front end. Every experiment is described by a key=value
// manifest; flags mirror manifest keys and override entries loaded from
// --manifest. Exit codes: 0 success, 2 usage/config error, 3 runtime failure.

#include <cstdio>
#include <exception>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cautious/commands.hpp"
#include "cautious/manifest.hpp"

namespace {

struct SubcommandState {
  std::string manifest_path;
  std::map<std::string, std::string> overrides;
  std::function<void(const cautious::Manifest&)> run;
};

void add_keys(CLI::App* cmd, SubcommandState& state,
              const std::vector<std::pair<std::string, std::string>>& keys) {
  for (const auto& [key, help] : keys) {
    cmd->add_option_function<std::string>(
        "--" + key, [&state, key = key](const std::string& value) { state.overrides[key] = value; },
        help);
  }
}

const std::vector<std::pair<std::string, std::string>> kCommonKeys = {
    {"seed", "master seed; all randomness derives from it"},
    {"format", "output table format: csv or json"},
    {"task", "ask_for_help | risk_reward | help_availability | perturbed_help | gridworld"},
};

const std::vector<std::pair<std::string, std::string>> kDataKeys = {
    {"n_classes", "bandit classes (default 10)"},
    {"per_class", "contexts generated per class per split (default 100)"},
    {"feature_dim", "context feature dimension (default 8)"},
    {"cluster_spread", "familiar cluster standard deviation (default 0.25)"},
    {"novel_shift", "novel cluster displacement (default 10x spread)"},
    {"data_seed", "dataset seed (defaults to seed)"},
    {"eval", "evaluation split: familiar or novel (default novel)"},
    {"eval_contexts", "evaluation subsample size; 0 = all (default 0)"},
};

const std::vector<std::pair<std::string, std::string>> kGridKeys = {
    {"vision_rows", "visible road rows ahead (default 2)"},
    {"spawn_prob", "obstacle spawn probability per revealed row (default 0.5)"},
    {"discount", "gridworld discount (default 0.99)"},
    {"env", "evaluation variant: familiar or novel (default familiar)"},
    {"obstacle_columns", "explicit spawn columns, comma separated (overrides env)"},
};

const std::vector<std::pair<std::string, std::string>> kTrainerKeys = {
    {"members", "ensemble size (required)"},
    {"epochs", "training epochs per member (default 50)"},
    {"batch", "minibatch size (default 32)"},
    {"hidden", "hidden layer width (default 32)"},
    {"learning_rate", "step size (default 0.0016)"},
    {"weight_decay", "L2 coefficient (default 0, gridworld 1e-5)"},
    {"optimizer", "adam or sgd (default adam)"},
    {"checkpoints", "also write member_N.mlp weight files (default false)"},
    {"fraction", "fraction of training data kept, seeded subsample (default 1.0)"},
    {"perturb_sd", "training-target noise sd for perturbed_help (default 0.1)"},
};

const std::vector<std::pair<std::string, std::string>> kRunKeys = {
    {"ensemble_dir", "ensemble directory to read (required)"},
    {"k", "worst members mixed per iteration (required)"},
    {"n", "members sampled per iteration (required)"},
    {"iterations", "CFR iterations (default 100)"},
    {"output", "policy choice: last, best or sampled (default last)"},
    {"eval_repetitions", "k-of-N value estimates for output=best (default 1)"},
    {"repetitions", "independent runs, seeds seed..seed+R-1 (default 1)"},
    {"replacement", "sample members with replacement (default false)"},
    {"regime", "bandit state space: all_images or single_image (default single_image)"},
};

CLI::App* make_subcommand(CLI::App& app, SubcommandState& state, const std::string& name,
                          const std::string& description,
                          void (*command)(const cautious::Manifest&)) {
  CLI::App* cmd = app.add_subcommand(name, description);
  cmd->add_option("--manifest", state.manifest_path, "key=value manifest file");
  add_keys(cmd, state, kCommonKeys);
  state.run = command;
  return cmd;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"k-of-N cautious policy experiments"};
  app.require_subcommand(1);

  SubcommandState train, run, baseline, grid_stats, bandit_metrics;

  CLI::App* train_cmd = make_subcommand(app, train, "train-ensemble",
                                        "train a reward-model ensemble and tabularize it",
                                        &cautious::cmd_train_ensemble);
  add_keys(train_cmd, train, kDataKeys);
  add_keys(train_cmd, train, kGridKeys);
  add_keys(train_cmd, train, kTrainerKeys);
  add_keys(train_cmd, train, {{"out_dir", "ensemble output directory (required)"}});

  CLI::App* run_cmd =
      make_subcommand(app, run, "run-kofn", "run k-of-N CFR against a stored ensemble",
                      &cautious::cmd_run_kofn);
  add_keys(run_cmd, run, kDataKeys);
  add_keys(run_cmd, run, kGridKeys);
  add_keys(run_cmd, run, kRunKeys);
  add_keys(run_cmd, run, {{"out_dir", "run output directory (required)"}});

  CLI::App* baseline_cmd =
      make_subcommand(app, baseline, "baseline",
                      "per-member greedy-policy metrics with mean and 95% interval",
                      &cautious::cmd_baseline);
  add_keys(baseline_cmd, baseline, kDataKeys);
  add_keys(baseline_cmd, baseline, kGridKeys);
  add_keys(baseline_cmd, baseline,
           {{"ensemble_dir", "ensemble directory to read (required)"},
            {"out", "output table path (required)"}});

  CLI::App* grid_stats_cmd =
      make_subcommand(app, grid_stats, "gridworld-stats",
                      "recompute safety statistics for stored gridworld runs",
                      &cautious::cmd_gridworld_stats);
  add_keys(grid_stats_cmd, grid_stats,
           {{"runs", "comma-separated run directories (required)"},
            {"out", "output table path (required)"}});

  CLI::App* bandit_metrics_cmd =
      make_subcommand(app, bandit_metrics, "bandit-metrics",
                      "recompute caution metrics for stored bandit runs",
                      &cautious::cmd_bandit_metrics);
  add_keys(bandit_metrics_cmd, bandit_metrics,
           {{"runs", "comma-separated run directories (required)"},
            {"out", "output table path (required)"}});

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const std::vector<std::pair<CLI::App*, SubcommandState*>> table = {
      {train_cmd, &train},
      {run_cmd, &run},
      {baseline_cmd, &baseline},
      {grid_stats_cmd, &grid_stats},
      {bandit_metrics_cmd, &bandit_metrics},
  };

  for (const auto& [cmd, state] : table) {
    if (!app.got_subcommand(cmd)) continue;
    try {
      cautious::Manifest manifest;
      if (!state->manifest_path.empty()) {
        manifest = cautious::Manifest::load(state->manifest_path);
      }
      for (const auto& [key, value] : state->overrides) manifest.set(key, value);
      state->run(manifest);
      return 0;
    } catch (const cautious::ConfigError& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      return 2;
    } catch (const std::exception& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      return 3;
    }
  }
  return 2;
}
