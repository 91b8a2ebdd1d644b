#include "cautious/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <sstream>

#include "cautious/bandits.hpp"
#include "cautious/ensemble.hpp"
#include "cautious/gridworld.hpp"
#include "cautious/io.hpp"
#include "cautious/kofn.hpp"
#include "cautious/mlp.hpp"
#include "cautious/policy_eval.hpp"
#include "cautious/rng.hpp"

namespace cautious {

namespace {

namespace fs = std::filesystem;

bool is_gridworld(const Manifest& m) { return m.get_string("task", "") == "gridworld"; }

BanditTaskSpec bandit_task(const Manifest& m) {
  const std::string name = m.require_string("task");
  BanditTaskSpec task;
  task.n_classes = m.get_count("n_classes", 10);
  if (task.n_classes == 0) throw ConfigError("n_classes must be positive");
  if (name == "ask_for_help") {
    task.kind = BanditKind::kAskForHelp;
  } else if (name == "risk_reward") {
    task.kind = BanditKind::kRiskReward;
  } else if (name == "help_availability") {
    task.kind = BanditKind::kHelpAvailability;
  } else if (name == "perturbed_help") {
    task.kind = BanditKind::kPerturbedHelp;
  } else {
    throw ConfigError("unknown task '" + name + "'");
  }
  return task;
}

/// Evaluation-side grid variant; env=familiar|novel, with an optional
/// explicit obstacle_columns override ("0,1,3" style).
GridConfig grid_eval_config(const Manifest& m) {
  GridConfig config;
  config.vision_rows = m.get_count("vision_rows", 2);
  config.obstacle_spawn_prob = m.get_double("spawn_prob", 0.5);
  config.discount = m.get_double("discount", 0.99);
  const std::string env = m.get_string("env", "familiar");
  if (env == "novel") {
    config.obstacle_columns = {0, 1, 2, 3};
  } else if (env != "familiar") {
    throw ConfigError("env must be 'familiar' or 'novel', got '" + env + "'");
  }
  if (const auto cols = m.find("obstacle_columns")) {
    config.obstacle_columns.clear();
    std::istringstream in(*cols);
    std::string field;
    while (std::getline(in, field, ',')) {
      if (field.empty()) continue;
      std::size_t column = 0;
      try {
        column = std::stoul(field);
      } catch (const std::exception&) {
        throw ConfigError("obstacle_columns entry '" + field + "' is not a column index");
      }
      if (column >= kGridColumns) {
        throw ConfigError("obstacle_columns entry '" + field + "' is out of range");
      }
      config.obstacle_columns.push_back(column);
    }
    if (config.obstacle_columns.empty()) {
      throw ConfigError("obstacle_columns override must list at least one column");
    }
  }
  return config;
}

/// The variant reward models train in: always ditch-only obstacles, sharing
/// the eval variant's other parameters.
GridConfig grid_train_config(const Manifest& m) {
  GridConfig config = grid_eval_config(m);
  config.obstacle_columns = {0, 3};
  return config;
}

/// Everything a bandit command needs, derived deterministically from the
/// manifest: the regenerated dataset, the evaluation context set and its
/// model features, and (for training commands) the training examples.
struct BanditSetup {
  BanditTaskSpec task;
  BanditDataset dataset;
  std::vector<BanditContext> eval_contexts;
  std::vector<std::vector<double>> eval_features;
};

std::vector<BanditContext> select_eval_contexts(const std::vector<BanditContext>& pool,
                                                std::size_t limit, std::uint64_t seed) {
  if (limit == 0 || limit >= pool.size()) return pool;
  // Seeded subsample (near class-balanced in expectation); stable order.
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto engine = make_engine(seed, "eval");
  std::shuffle(order.begin(), order.end(), engine);
  order.resize(limit);
  std::sort(order.begin(), order.end());
  std::vector<BanditContext> picked;
  picked.reserve(limit);
  for (std::size_t i : order) picked.push_back(pool[i]);
  return picked;
}

BanditSetup bandit_setup(const Manifest& m) {
  BanditSetup setup;
  setup.task = bandit_task(m);
  const std::uint64_t data_seed = m.get_uint64("data_seed", m.get_uint64("seed", 0));
  const double spread = m.get_double("cluster_spread", 0.25);
  const double shift = m.get_double("novel_shift", 10.0 * spread);
  setup.dataset = make_dataset(setup.task.n_classes, m.get_count("per_class", 100), spread, shift,
                               data_seed, m.get_count("feature_dim", 8));

  const std::string eval = m.get_string("eval", "novel");
  if (eval != "familiar" && eval != "novel") {
    throw ConfigError("eval must be 'familiar' or 'novel', got '" + eval + "'");
  }
  const auto& pool = eval == "novel" ? setup.dataset.novel : setup.dataset.familiar;
  setup.eval_contexts = select_eval_contexts(pool, m.get_count("eval_contexts", 0), data_seed);
  setup.eval_features.reserve(setup.eval_contexts.size());
  for (const auto& context : setup.eval_contexts) {
    setup.eval_features.push_back(context_features(setup.task, context));
  }
  return setup;
}

std::vector<TrainExample> bandit_training_examples(const Manifest& m, const BanditSetup& setup) {
  const std::uint64_t data_seed = m.get_uint64("data_seed", m.get_uint64("seed", 0));
  const double fraction = m.get_double("fraction", 1.0);
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("fraction must be in (0, 1]");
  const auto contexts = training_subset(setup.dataset.familiar, fraction, data_seed);
  return make_training_examples(setup.task, contexts, data_seed,
                                m.get_double("perturb_sd", 0.1));
}

std::vector<TrainExample> gridworld_training_examples(const Manifest& m,
                                                      const GridConfig& train_config) {
  const auto states = enumerate_states(train_config);
  std::vector<std::vector<double>> features;
  features.reserve(states.size());
  for (const auto& state : states) features.push_back(encode_features(train_config, state));

  std::vector<TrainExample> examples;
  for (const auto& sample : transition_samples(train_config)) {
    TrainExample example;
    example.features = features[sample.state];
    example.features.insert(example.features.end(), features[sample.next_state].begin(),
                            features[sample.next_state].end());
    example.target = {sample.reward};
    examples.push_back(std::move(example));
  }

  const double fraction = m.get_double("fraction", 1.0);
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("fraction must be in (0, 1]");
  if (fraction < 1.0) {
    const std::uint64_t data_seed = m.get_uint64("data_seed", m.get_uint64("seed", 0));
    const auto keep = static_cast<std::size_t>(
        std::max(1.0, std::round(fraction * static_cast<double>(examples.size()))));
    auto engine = make_engine(data_seed, "subset");
    std::shuffle(examples.begin(), examples.end(), engine);
    examples.resize(keep);
  }
  return examples;
}

TrainConfig train_config_from(const Manifest& m, bool gridworld) {
  TrainConfig config;
  config.epochs = m.get_count("epochs", 50);
  config.batch_size = m.get_count("batch", 32);
  config.hidden_dim = m.get_count("hidden", 32);
  config.learning_rate = m.get_double("learning_rate", 0.0016);
  config.weight_decay = m.get_double("weight_decay", gridworld ? 1e-5 : 0.0);
  const std::string optimizer = m.get_string("optimizer", "adam");
  if (optimizer == "adam") {
    config.optimizer = Optimizer::kAdaptiveMoments;
  } else if (optimizer == "sgd") {
    config.optimizer = Optimizer::kPlainGradient;
  } else {
    throw ConfigError("optimizer must be 'adam' or 'sgd', got '" + optimizer + "'");
  }
  if (config.epochs == 0 || config.batch_size == 0 || config.hidden_dim == 0) {
    throw ConfigError("epochs, batch and hidden must be positive");
  }
  if (config.learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
  return config;
}

KofnConfig kofn_config_from(const Manifest& m) {
  KofnConfig config;
  config.k = m.require_count("k");
  config.n = m.require_count("n");
  if (config.k == 0 || config.k > config.n) {
    throw ConfigError("k must satisfy 1 <= k <= n");
  }
  config.iterations = m.get_count("iterations", 100);
  if (config.iterations == 0) throw ConfigError("iterations must be positive");
  config.eval_repetitions = m.get_count("eval_repetitions", 1);
  const std::string output = m.get_string("output", "last");
  if (output == "last") {
    config.output = KofnOutput::kLast;
  } else if (output == "best") {
    config.output = KofnOutput::kBest;
  } else if (output == "sampled") {
    config.output = KofnOutput::kSampled;
  } else {
    throw ConfigError("output must be last, best or sampled, got '" + output + "'");
  }
  return config;
}

OutputFormat format_from(const Manifest& m) {
  return parse_output_format(m.get_string("format", "csv"));
}

std::string table_name(const std::string& stem, OutputFormat format) {
  return stem + (format == OutputFormat::kCsv ? ".csv" : ".json");
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::istringstream in(text);
  std::string field;
  while (std::getline(in, field, ',')) {
    if (!field.empty()) items.push_back(field);
  }
  return items;
}

std::vector<RewardTable> load_ensemble(const Manifest& m) {
  const std::string dir = m.require_string("ensemble_dir");
  if (!fs::exists(fs::path(dir) / "manifest.txt")) {
    throw ConfigError("ensemble_dir '" + dir + "' has no manifest.txt");
  }
  return read_ensemble_dir(dir);
}

/// Mean and half-width of a normal-approximation 95% interval.
std::pair<double, double> mean_ci(const std::vector<double>& values) {
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double stderr_ =
      std::sqrt(ss / static_cast<double>(values.size() - 1) / static_cast<double>(values.size()));
  return {mean, 1.96 * stderr_};
}

}  // namespace

void cmd_train_ensemble(const Manifest& m) {
  const fs::path out_dir = m.require_string("out_dir");
  const std::size_t members = m.require_count("members");
  if (members == 0) throw ConfigError("members must be positive");
  const std::uint64_t seed = m.get_uint64("seed", 0);
  const bool gridworld = is_gridworld(m);
  TrainConfig config = train_config_from(m, gridworld);

  std::vector<TrainExample> examples;
  std::vector<std::vector<double>> eval_features;
  std::size_t n_actions = 0;
  TabularizeMode mode = TabularizeMode::kBanditActions;
  if (gridworld) {
    const GridConfig train_cfg = grid_train_config(m);
    const GridConfig eval_cfg = grid_eval_config(m);
    examples = gridworld_training_examples(m, train_cfg);
    for (const auto& state : enumerate_states(eval_cfg)) {
      eval_features.push_back(encode_features(eval_cfg, state));
    }
    n_actions = kDriveActionCount;
    mode = TabularizeMode::kStatePair;
  } else {
    const BanditSetup setup = bandit_setup(m);
    examples = bandit_training_examples(m, setup);
    eval_features = setup.eval_features;
    n_actions = setup.task.n_actions();
    config.output_weights = task_output_weights(setup.task);
  }

  const bool checkpoints = m.get_bool("checkpoints", false);
  std::vector<MlpRewardModel> models;
  std::vector<std::vector<double>> losses;
  const RewardEnsemble ensemble =
      ensemble_train(examples, members, seed, config, eval_features, n_actions, mode,
                     /*with_replacement=*/false, checkpoints ? &models : nullptr, &losses);

  write_ensemble_dir(out_dir, ensemble);
  for (std::size_t i = 0; i < models.size(); ++i) {
    write_mlp(out_dir / ("member_" + std::to_string(i) + ".mlp"), models[i]);
  }

  OutputTable loss_log;
  loss_log.columns = {"member", "epoch", "loss"};
  for (std::size_t i = 0; i < losses.size(); ++i) {
    for (std::size_t e = 0; e < losses[i].size(); ++e) {
      loss_log.rows.push_back({i, e + 1, losses[i][e]});
    }
  }
  const OutputFormat format = format_from(m);
  write_table(out_dir / table_name("training_loss", format), loss_log, format, m.hash(), seed);
  atomic_write_text(out_dir / "train.manifest", m.canonical_text());
}

void cmd_run_kofn(const Manifest& m) {
  const fs::path out_dir = m.require_string("out_dir");
  fs::create_directories(out_dir);
  const std::uint64_t seed = m.get_uint64("seed", 0);
  const std::size_t repetitions = m.get_count("repetitions", 1);
  if (repetitions == 0) throw ConfigError("repetitions must be positive");
  const bool replacement = m.get_bool("replacement", false);
  const KofnConfig base_config = kofn_config_from(m);
  const OutputFormat format = format_from(m);

  std::vector<RewardTable> members = load_ensemble(m);
  OutputTable metrics;

  if (is_gridworld(m)) {
    const GridConfig eval_cfg = grid_eval_config(m);
    const GridMdp grid = to_tabular_mdp(eval_cfg);
    if (members.front().n_states() != grid.mdp.n_states) {
      throw ConfigError("ensemble tables do not cover the evaluation gridworld");
    }
    RewardEnsemble ensemble(std::move(members), replacement);
    metrics.columns = {"k", "n", "iterations", "rep", "output_iteration",
                       "discounted_speed", "discounted_collision_rate",
                       "discounted_collision_speed"};
    for (std::size_t rep = 0; rep < repetitions; ++rep) {
      KofnConfig config = base_config;
      config.seed = seed + rep;
      const KofnResult result = run_kofn(grid.mdp, ensemble, config);
      write_policy(out_dir / ("policy_rep" + std::to_string(rep) + ".pol"), result.policy);
      write_run_record(out_dir / ("record_rep" + std::to_string(rep) + ".log"), result.record);
      const SafetyStats stats = safety_stats(eval_cfg, grid.mdp, result.policy);
      metrics.rows.push_back({config.k, config.n, config.iterations, rep,
                              result.record.output_iteration, stats.discounted_speed,
                              stats.discounted_collision_rate, stats.discounted_collision_speed});
    }
  } else {
    const BanditSetup setup = bandit_setup(m);
    if (members.front().n_states() != setup.eval_contexts.size()) {
      throw ConfigError("ensemble tables do not cover the evaluation context set");
    }
    const std::string regime = m.get_string("regime", "single_image");
    metrics.columns = {"task",           "regime", "k", "n", "iterations", "rep",
                       "help_frequency", "mean_action_index", "accuracy"};
    const std::string task_name = m.require_string("task");

    if (regime == "all_images") {
      const BanditMdp bandit =
          to_bandit_mdp(setup.task, setup.eval_contexts, BanditRegime::kAllImages, 0, false);
      RewardEnsemble ensemble(std::move(members), replacement);
      for (std::size_t rep = 0; rep < repetitions; ++rep) {
        KofnConfig config = base_config;
        config.seed = seed + rep;
        const KofnResult result = run_kofn(bandit.mdp, ensemble, config);
        write_policy(out_dir / ("policy_rep" + std::to_string(rep) + ".pol"), result.policy);
        write_run_record(out_dir / ("record_rep" + std::to_string(rep) + ".log"), result.record);
        const CautionMetrics cm = caution_metrics(result.policy, setup.task, setup.eval_contexts);
        metrics.rows.push_back({task_name, regime, config.k, config.n, config.iterations, rep,
                                cm.help_frequency, cm.mean_action_index, cm.accuracy});
      }
    } else if (regime == "single_image") {
      // Discount 0 decouples states, so each context's run is executed on a
      // one-state slice; rows are stacked back into one policy per rep.
      const std::size_t n_contexts = setup.eval_contexts.size();
      std::vector<std::vector<RewardTable>> slices(n_contexts);
      for (std::size_t i = 0; i < n_contexts; ++i) {
        slices[i].reserve(members.size());
        for (const auto& member : members) slices[i].push_back(slice_reward(member, i));
      }
      const TabularMdp point = point_mass_mdp(setup.task.n_actions());
      for (std::size_t rep = 0; rep < repetitions; ++rep) {
        KofnConfig config = base_config;
        config.seed = seed + rep;
        StationaryPolicy stacked{Matrix(n_contexts, setup.task.n_actions())};
        for (std::size_t i = 0; i < n_contexts; ++i) {
          RewardEnsemble ensemble(slices[i], replacement);
          const KofnResult result = run_kofn(point, ensemble, config);
          for (std::size_t a = 0; a < setup.task.n_actions(); ++a) {
            stacked.probs(i, a) = result.policy.probs(0, a);
          }
          write_run_record(out_dir / ("record_rep" + std::to_string(rep) + "_ctx" +
                                      std::to_string(i) + ".log"),
                           result.record);
        }
        write_policy(out_dir / ("policy_rep" + std::to_string(rep) + ".pol"), stacked);
        const CautionMetrics cm = caution_metrics(stacked, setup.task, setup.eval_contexts);
        metrics.rows.push_back({task_name, regime, config.k, config.n, config.iterations, rep,
                                cm.help_frequency, cm.mean_action_index, cm.accuracy});
      }
    } else {
      throw ConfigError("regime must be all_images or single_image, got '" + regime + "'");
    }
  }

  write_table(out_dir / table_name("metrics", format), metrics, format, m.hash(), seed);
  atomic_write_text(out_dir / "run.manifest", m.canonical_text());
}

void cmd_baseline(const Manifest& m) {
  const fs::path out_path = m.require_string("out");
  const std::uint64_t seed = m.get_uint64("seed", 0);
  const OutputFormat format = format_from(m);
  const std::vector<RewardTable> members = load_ensemble(m);

  OutputTable table;
  std::vector<std::vector<double>> metric_values;  // per numeric column, per member

  if (is_gridworld(m)) {
    const GridConfig eval_cfg = grid_eval_config(m);
    const GridMdp grid = to_tabular_mdp(eval_cfg);
    if (members.front().n_states() != grid.mdp.n_states) {
      throw ConfigError("ensemble tables do not cover the evaluation gridworld");
    }
    table.columns = {"row", "member", "discounted_speed", "discounted_collision_rate",
                     "discounted_collision_speed"};
    metric_values.resize(3);
    for (std::size_t i = 0; i < members.size(); ++i) {
      const StationaryPolicy policy = optimal_policy(grid.mdp, members[i]);
      const SafetyStats stats = safety_stats(eval_cfg, grid.mdp, policy);
      table.rows.push_back({"member", i, stats.discounted_speed, stats.discounted_collision_rate,
                            stats.discounted_collision_speed});
      metric_values[0].push_back(stats.discounted_speed);
      metric_values[1].push_back(stats.discounted_collision_rate);
      metric_values[2].push_back(stats.discounted_collision_speed);
    }
  } else {
    const BanditSetup setup = bandit_setup(m);
    if (members.front().n_states() != setup.eval_contexts.size()) {
      throw ConfigError("ensemble tables do not cover the evaluation context set");
    }
    const BanditMdp bandit =
        to_bandit_mdp(setup.task, setup.eval_contexts, BanditRegime::kAllImages, 0, false);
    table.columns = {"row", "member", "help_frequency", "mean_action_index", "accuracy"};
    metric_values.resize(3);
    for (std::size_t i = 0; i < members.size(); ++i) {
      const StationaryPolicy policy = optimal_policy(bandit.mdp, members[i]);
      const CautionMetrics cm = caution_metrics(policy, setup.task, setup.eval_contexts);
      table.rows.push_back({"member", i, cm.help_frequency, cm.mean_action_index, cm.accuracy});
      metric_values[0].push_back(cm.help_frequency);
      metric_values[1].push_back(cm.mean_action_index);
      metric_values[2].push_back(cm.accuracy);
    }
  }

  std::vector<Cell> mean_row{"mean", std::string("")};
  std::vector<Cell> ci_row{"ci95_half_width", std::string("")};
  for (const auto& values : metric_values) {
    const auto [mean, ci] = mean_ci(values);
    mean_row.push_back(mean);
    if (values.size() < 2) {
      ci_row.push_back("n/a");
    } else {
      ci_row.push_back(ci);
    }
  }
  table.rows.push_back(std::move(mean_row));
  table.rows.push_back(std::move(ci_row));

  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  write_table(out_path, table, format, m.hash(), seed);
}

void cmd_gridworld_stats(const Manifest& m) {
  const fs::path out_path = m.require_string("out");
  const OutputFormat format = format_from(m);
  const auto runs = split_list(m.require_string("runs"));
  if (runs.empty()) throw ConfigError("runs must list at least one run directory");

  OutputTable table;
  table.columns = {"run", "k", "n", "rep", "discounted_speed", "discounted_collision_rate",
                   "discounted_collision_speed"};
  for (const auto& run : runs) {
    const fs::path dir = run;
    if (!fs::exists(dir / "run.manifest")) {
      throw ConfigError("run directory '" + run + "' has no run.manifest");
    }
    const Manifest rm = Manifest::load(dir / "run.manifest");
    if (!is_gridworld(rm)) throw ConfigError("run '" + run + "' is not a gridworld run");
    const GridConfig eval_cfg = grid_eval_config(rm);
    const GridMdp grid = to_tabular_mdp(eval_cfg);
    const std::size_t reps = rm.get_count("repetitions", 1);
    const std::size_t k = rm.require_count("k");
    const std::size_t n = rm.require_count("n");
    for (std::size_t rep = 0; rep < reps; ++rep) {
      const StationaryPolicy policy =
          read_policy(dir / ("policy_rep" + std::to_string(rep) + ".pol"));
      const SafetyStats stats = safety_stats(eval_cfg, grid.mdp, policy);
      table.rows.push_back({run, k, n, rep, stats.discounted_speed,
                            stats.discounted_collision_rate, stats.discounted_collision_speed});
    }
  }

  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  write_table(out_path, table, format, m.hash(), m.get_uint64("seed", 0));
}

void cmd_bandit_metrics(const Manifest& m) {
  const fs::path out_path = m.require_string("out");
  const OutputFormat format = format_from(m);
  const auto runs = split_list(m.require_string("runs"));
  if (runs.empty()) throw ConfigError("runs must list at least one run directory");

  OutputTable table;
  table.columns = {"run",  "task", "regime",         "k",
                   "n",    "rep",  "help_frequency", "mean_action_index",
                   "accuracy"};
  for (const auto& run : runs) {
    const fs::path dir = run;
    if (!fs::exists(dir / "run.manifest")) {
      throw ConfigError("run directory '" + run + "' has no run.manifest");
    }
    const Manifest rm = Manifest::load(dir / "run.manifest");
    if (is_gridworld(rm)) throw ConfigError("run '" + run + "' is not a bandit run");
    const BanditSetup setup = bandit_setup(rm);
    const std::size_t reps = rm.get_count("repetitions", 1);
    const std::size_t k = rm.require_count("k");
    const std::size_t n = rm.require_count("n");
    const std::string task_name = rm.require_string("task");
    const std::string regime = rm.get_string("regime", "single_image");
    for (std::size_t rep = 0; rep < reps; ++rep) {
      const StationaryPolicy policy =
          read_policy(dir / ("policy_rep" + std::to_string(rep) + ".pol"));
      const CautionMetrics cm = caution_metrics(policy, setup.task, setup.eval_contexts);
      table.rows.push_back({run, task_name, regime, k, n, rep, cm.help_frequency,
                            cm.mean_action_index, cm.accuracy});
    }
  }

  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  write_table(out_path, table, format, m.hash(), m.get_uint64("seed", 0));
}

}  // namespace cautious
