#include "cautious/bandits.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "cautious/io.hpp"
#include "cautious/rng.hpp"

namespace cautious {

double true_reward(const BanditTaskSpec& task, const BanditContext& context, std::size_t action) {
  if (action >= task.n_actions()) throw std::invalid_argument("action out of range");
  if (context.novel) {
    throw std::invalid_argument("true_reward: no reward is defined for novel contexts");
  }
  switch (task.kind) {
    case BanditKind::kAskForHelp:
    case BanditKind::kPerturbedHelp:
      if (action == task.help_action()) return 0.25;
      return action == context.label ? 1.0 : 0.0;
    case BanditKind::kRiskReward:
      return action == context.label ? static_cast<double>(action) + 1.0
                                     : -(static_cast<double>(action) + 2.0) / 9.0;
    case BanditKind::kHelpAvailability:
      if (action == task.help_action()) {
        return context.help_available ? 1.0 / 20.0 : -11.0 / 9.0;
      }
      return action == context.label ? static_cast<double>(action) + 1.0
                                     : -(static_cast<double>(action) + 2.0) / 9.0;
  }
  throw std::invalid_argument("unknown task kind");
}

BanditDataset make_dataset(std::size_t n_classes, std::size_t per_class, double cluster_spread,
                           double novel_shift, std::uint64_t seed, std::size_t feature_dim) {
  if (n_classes == 0 || per_class == 0 || feature_dim == 0) {
    throw std::invalid_argument("make_dataset: counts must be positive");
  }
  if (cluster_spread <= 0.0) throw std::invalid_argument("make_dataset: spread must be positive");

  std::normal_distribution<double> gauss(0.0, 1.0);

  // Familiar class means occupy a low-dimensional coordinate slice, mirroring
  // image classes that sit on a thin manifold of pixel space. Novel means are
  // displaced off that slice, into directions the familiar data never pins
  // down, so reward models extrapolate there instead of interpolating.
  const std::size_t span = (feature_dim + 1) / 2;
  auto means_engine = make_engine(seed, "means");
  std::vector<std::vector<double>> means(n_classes, std::vector<double>(feature_dim));
  for (auto& mean : means) {
    for (std::size_t i = 0; i < span; ++i) mean[i] = gauss(means_engine);
  }

  auto shift_engine = make_engine(seed, "shift");
  std::vector<std::vector<double>> novel_means = means;
  for (auto& mean : novel_means) {
    const std::size_t first = span < feature_dim ? span : 0;
    std::vector<double> direction(feature_dim, 0.0);
    double norm = 0.0;
    for (std::size_t i = first; i < feature_dim; ++i) {
      direction[i] = gauss(shift_engine);
      norm += direction[i] * direction[i];
    }
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < feature_dim; ++i) mean[i] += novel_shift * direction[i] / norm;
  }

  // Scatter stays inside the slice: off-slice coordinates carry no noise, so
  // the training data never exercises them.
  auto scatter = [&](const std::vector<std::vector<double>>& centers, const char* stream) {
    auto engine = make_engine(seed, stream);
    std::vector<BanditContext> contexts;
    contexts.reserve(n_classes * per_class);
    for (std::size_t c = 0; c < n_classes; ++c) {
      for (std::size_t i = 0; i < per_class; ++i) {
        BanditContext context;
        context.label = c;
        context.features = centers[c];
        for (std::size_t d = 0; d < span; ++d) {
          context.features[d] += cluster_spread * gauss(engine);
        }
        contexts.push_back(std::move(context));
      }
    }
    return contexts;
  };

  BanditDataset dataset;
  dataset.familiar = scatter(means, "familiar");
  dataset.novel = scatter(novel_means, "novel");
  for (auto& context : dataset.novel) context.novel = true;

  auto help_engine = make_engine(seed, "help");
  std::bernoulli_distribution coin(0.5);
  for (auto& context : dataset.familiar) context.help_available = coin(help_engine);
  for (auto& context : dataset.novel) context.help_available = coin(help_engine);
  return dataset;
}

std::vector<BanditContext> training_subset(const std::vector<BanditContext>& contexts,
                                           double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("training_subset: fraction must be in (0, 1]");
  }
  if (fraction == 1.0) return contexts;
  const auto keep = static_cast<std::size_t>(
      std::max(1.0, std::round(fraction * static_cast<double>(contexts.size()))));
  std::vector<std::size_t> order(contexts.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto engine = make_engine(seed, "subset");
  std::shuffle(order.begin(), order.end(), engine);
  order.resize(keep);
  std::sort(order.begin(), order.end());
  std::vector<BanditContext> subset;
  subset.reserve(keep);
  for (std::size_t i : order) subset.push_back(contexts[i]);
  return subset;
}

BanditMdp to_bandit_mdp(const BanditTaskSpec& task, const std::vector<BanditContext>& contexts,
                        BanditRegime regime, std::size_t image_index, bool emit_reward) {
  if (contexts.empty()) throw std::invalid_argument("to_bandit_mdp: no contexts");
  if (regime == BanditRegime::kSingleImage && image_index >= contexts.size()) {
    throw std::out_of_range("to_bandit_mdp: image index out of range");
  }
  const std::size_t n = contexts.size();
  const std::size_t n_actions = task.n_actions();

  BanditMdp out;
  out.mdp.n_states = n;
  out.mdp.n_actions = n_actions;
  out.mdp.discount = 0.0;
  out.mdp.transition = Tensor3(n, n_actions, n);
  out.mdp.initial_dist.assign(n, 0.0);

  if (regime == BanditRegime::kAllImages) {
    const double u = 1.0 / static_cast<double>(n);
    for (std::size_t s = 0; s < n; ++s) out.mdp.initial_dist[s] = u;
    for (std::size_t i = 0; i < out.mdp.transition.size(); ++i) out.mdp.transition.data()[i] = u;
  } else {
    out.mdp.initial_dist[image_index] = 1.0;
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t a = 0; a < n_actions; ++a) out.mdp.transition(s, a, s) = 1.0;
    }
  }

  const bool any_novel =
      std::any_of(contexts.begin(), contexts.end(), [](const auto& c) { return c.novel; });
  if (emit_reward && !any_novel) {
    RewardTable reward;
    reward.values = Tensor3(n, n_actions, n);
    double bound = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t a = 0; a < n_actions; ++a) {
        const double r = true_reward(task, contexts[s], a);
        bound = std::max(bound, std::abs(r));
        auto row = reward.values.slice(s, a);
        for (std::size_t t = 0; t < n; ++t) row[t] = r;
      }
    }
    reward.bound = bound;
    out.reward = std::move(reward);
  }
  return out;
}

TabularMdp point_mass_mdp(std::size_t n_actions) {
  if (n_actions == 0) throw std::invalid_argument("point_mass_mdp: n_actions must be positive");
  TabularMdp mdp;
  mdp.n_states = 1;
  mdp.n_actions = n_actions;
  mdp.discount = 0.0;
  mdp.transition = Tensor3(1, n_actions, 1);
  for (std::size_t a = 0; a < n_actions; ++a) mdp.transition(0, a, 0) = 1.0;
  mdp.initial_dist = {1.0};
  return mdp;
}

RewardTable slice_reward(const RewardTable& full, std::size_t state) {
  if (state >= full.n_states()) throw std::out_of_range("slice_reward: state out of range");
  RewardTable out;
  out.bound = full.bound;
  out.values = Tensor3(1, full.n_actions(), 1);
  for (std::size_t a = 0; a < full.n_actions(); ++a) {
    out.values(0, a, 0) = full.values(state, a, state);
  }
  return out;
}

std::vector<double> context_features(const BanditTaskSpec& task, const BanditContext& context) {
  std::vector<double> features = context.features;
  if (task.kind == BanditKind::kHelpAvailability) {
    features.push_back(context.help_available ? 1.0 : 0.0);
  }
  return features;
}

std::vector<TrainExample> make_training_examples(const BanditTaskSpec& task,
                                                 const std::vector<BanditContext>& contexts,
                                                 std::uint64_t seed, double noise_sd) {
  std::vector<TrainExample> examples;
  examples.reserve(contexts.size());
  auto engine = make_engine(seed, "perturb");
  std::normal_distribution<double> gauss(0.0, noise_sd);
  for (const auto& context : contexts) {
    TrainExample example;
    example.features = context_features(task, context);
    example.target.resize(task.n_actions());
    for (std::size_t a = 0; a < task.n_actions(); ++a) {
      example.target[a] = true_reward(task, context, a);
      if (task.kind == BanditKind::kPerturbedHelp) example.target[a] += gauss(engine);
    }
    examples.push_back(std::move(example));
  }
  return examples;
}

std::vector<double> task_output_weights(const BanditTaskSpec& task) {
  if (task.kind != BanditKind::kRiskReward && task.kind != BanditKind::kHelpAvailability) {
    return {};
  }
  // Rewards scale with the class index; 1/(a+1)^2 keeps each output's loss
  // contribution comparable. The help output (if any) stays at 1.
  std::vector<double> weights(task.n_actions(), 1.0);
  for (std::size_t a = 0; a < task.n_classes; ++a) {
    const double scale = static_cast<double>(a) + 1.0;
    weights[a] = 1.0 / (scale * scale);
  }
  return weights;
}

CautionMetrics caution_metrics(const StationaryPolicy& policy, const BanditTaskSpec& task,
                               const std::vector<BanditContext>& contexts) {
  if (policy.n_states() != contexts.size() || policy.n_actions() != task.n_actions()) {
    throw std::invalid_argument("caution_metrics: policy shape does not match task/contexts");
  }
  CautionMetrics metrics;
  metrics.class_action_freq = Matrix(task.n_classes, task.n_actions());
  metrics.per_class_accuracy.assign(task.n_classes, 0.0);
  std::vector<double> class_mass(task.n_classes, 0.0);

  const double w = 1.0 / static_cast<double>(contexts.size());
  for (std::size_t s = 0; s < contexts.size(); ++s) {
    const std::size_t label = contexts[s].label;
    if (label >= task.n_classes) throw std::invalid_argument("caution_metrics: label out of range");
    class_mass[label] += 1.0;
    for (std::size_t a = 0; a < task.n_actions(); ++a) {
      const double p = policy.probs(s, a);
      metrics.mean_action_index += w * p * static_cast<double>(a);
      metrics.class_action_freq(label, a) += p;
    }
    metrics.accuracy += w * policy.probs(s, label);
    metrics.per_class_accuracy[label] += policy.probs(s, label);
    if (task.has_help()) metrics.help_frequency += w * policy.probs(s, task.help_action());
  }
  for (std::size_t c = 0; c < task.n_classes; ++c) {
    if (class_mass[c] == 0.0) continue;
    metrics.per_class_accuracy[c] /= class_mass[c];
    for (std::size_t a = 0; a < task.n_actions(); ++a) metrics.class_action_freq(c, a) /= class_mass[c];
  }
  return metrics;
}

void write_contexts_csv(const std::filesystem::path& path,
                        const std::vector<BanditContext>& contexts) {
  if (contexts.empty()) throw std::invalid_argument("write_contexts_csv: no contexts");
  const std::size_t dim = contexts.front().features.size();
  std::string out = "label,help";
  for (std::size_t d = 0; d < dim; ++d) out += ",f" + std::to_string(d);
  out += '\n';
  for (const auto& context : contexts) {
    if (context.features.size() != dim) {
      throw std::invalid_argument("write_contexts_csv: ragged feature vectors");
    }
    out += std::to_string(context.label);
    out += ',';
    out += context.help_available ? '1' : '0';
    for (double f : context.features) {
      out += ',';
      out += format_double(f);
    }
    out += '\n';
  }
  atomic_write_text(path, out);
}

std::vector<BanditContext> read_contexts_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.rfind("label,help", 0) != 0) {
    throw std::runtime_error(path.string() + ": expected header starting 'label,help'");
  }

  auto split = [](const std::string& text) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t end = text.find(',', start);
      if (end == std::string::npos) {
        fields.push_back(text.substr(start));
        break;
      }
      fields.push_back(text.substr(start, end - start));
      start = end + 1;
    }
    return fields;
  };

  std::vector<BanditContext> contexts;
  std::size_t line_no = 1;
  std::size_t dim = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split(line);
    if (fields.size() < 3) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": too few fields");
    }
    BanditContext context;
    context.label = static_cast<std::size_t>(std::stoul(fields[0]));
    context.help_available = fields[1] == "1";
    for (std::size_t i = 2; i < fields.size(); ++i) {
      context.features.push_back(parse_double(fields[i]));
    }
    if (dim == 0) {
      dim = context.features.size();
    } else if (context.features.size() != dim) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": inconsistent feature count");
    }
    contexts.push_back(std::move(context));
  }
  if (contexts.empty()) throw std::runtime_error(path.string() + ": no context rows");
  return contexts;
}

}  // namespace cautious
