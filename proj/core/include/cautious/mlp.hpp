#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cautious/ensemble.hpp"
#include "cautious/mdp.hpp"

namespace cautious {

/// Single-hidden-layer rectifier regressor. Small on purpose: the inputs are
/// short synthetic feature vectors or gridworld channel encodings, so one
/// hidden layer is enough to give ensemble members room to disagree away
/// from the training data.
struct MlpRewardModel {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  std::size_t output_dim = 0;
  Matrix w1;               // (hidden, input)
  std::vector<double> b1;  // hidden
  Matrix w2;               // (output, hidden)
  std::vector<double> b2;  // output
};

std::vector<double> forward(const MlpRewardModel& model, std::span<const double> features);

enum class Optimizer {
  kPlainGradient,
  kAdaptiveMoments,  // decay 0.9 / 0.999, epsilon 1e-8
};

struct TrainConfig {
  std::size_t epochs = 1;
  std::size_t batch_size = 32;
  std::size_t hidden_dim = 32;
  double learning_rate = 0.0016;
  double weight_decay = 0.0;  // L2 added to the gradient; 1e-5 for gridworld runs
  Optimizer optimizer = Optimizer::kAdaptiveMoments;
  std::uint64_t seed = 0;
  /// Per-output loss weights applied to every example that does not carry its
  /// own; empty means all ones.
  std::vector<double> output_weights;
};

struct TrainExample {
  std::vector<double> features;
  std::vector<double> target;
  std::vector<double> weight;  // optional per-output weights; empty = config default
};

/// Fan-in uniform initialization, U[-1/sqrt(fan_in), +1/sqrt(fan_in)] for
/// weights and biases, deterministic in the seed.
MlpRewardModel init_model(std::size_t input_dim, std::size_t hidden_dim, std::size_t output_dim,
                          std::uint64_t seed);

/// Mini-batch gradient descent on weighted MSE. Example order is reshuffled
/// every epoch from the seed's shuffle stream. Throws if the loss goes
/// non-finite, naming the offending step. When epoch_losses is given it
/// receives the full-dataset loss measured after each epoch.
MlpRewardModel train(const std::vector<TrainExample>& dataset, const TrainConfig& config,
                     std::vector<double>* epoch_losses = nullptr);

/// Mean weighted-MSE over the whole dataset (no gradient step).
double dataset_loss(const MlpRewardModel& model, const std::vector<TrainExample>& dataset,
                    const std::vector<double>& default_weights = {});

/// Backpropagation oracle: max over parameters of the relative error between
/// the analytic loss gradient at `example` and a central finite difference.
/// Relative error uses max(|analytic|, |numeric|, 1) as denominator so dead
/// units do not blow up the ratio.
double grad_check(const MlpRewardModel& model, const TrainExample& example, double eps = 1e-5);

enum class TabularizeMode {
  kBanditActions,  // output arity n_actions; entry (s,a,s') = prediction(s)[a]
  kStatePair,      // output arity 1; input (features(s), features(s')); replicated over actions
};

/// Evaluates the model over the enumerated state set and fills a dense
/// RewardTable; bound is the max |prediction| observed.
RewardTable tabularize(const MlpRewardModel& model,
                       const std::vector<std::vector<double>>& state_features,
                       std::size_t n_actions, TabularizeMode mode);

/// Trains `members` models with seeds base_seed+m and independently shuffled
/// example orders, tabularizes each, and returns them in seed order (queue
/// untouched: no shuffle has been applied). Optionally hands back the raw
/// models for checkpointing.
RewardEnsemble ensemble_train(const std::vector<TrainExample>& dataset, std::size_t members,
                              std::uint64_t base_seed, const TrainConfig& config,
                              const std::vector<std::vector<double>>& state_features,
                              std::size_t n_actions, TabularizeMode mode,
                              bool with_replacement = false,
                              std::vector<MlpRewardModel>* models_out = nullptr,
                              std::vector<std::vector<double>>* losses_out = nullptr);

/// Checkpoint format: header `CAUTIOUS-MLP v1`, dimensions line
/// `input hidden output`, then w1 rows, b1, w2 rows, b2 as decimal text.
void write_mlp(const std::filesystem::path& path, const MlpRewardModel& model);
MlpRewardModel read_mlp(const std::filesystem::path& path);

}  // namespace cautious
