#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "cautious/mdp.hpp"
#include "cautious/mlp.hpp"

namespace cautious {

/// Classification-flavored bandit families, written as discount-0 MDPs so the
/// same planning and CFR machinery applies unchanged.
enum class BanditKind {
  kAskForHelp,        // correct +1, wrong 0, help +0.25
  kRiskReward,        // correct a -> a+1, wrong a -> -(a+2)/9
  kHelpAvailability,  // risk-reward classes; help +1/20 if available, else -11/9
  kPerturbedHelp,     // ask-for-help with noisy training targets
};

struct BanditContext {
  std::vector<double> features;
  std::size_t label = 0;
  bool help_available = false;  // meaningful for kHelpAvailability
  bool novel = false;           // novel contexts carry no defined reward
};

struct BanditTaskSpec {
  BanditKind kind = BanditKind::kAskForHelp;
  std::size_t n_classes = 10;

  bool has_help() const {
    return kind != BanditKind::kRiskReward;
  }
  std::size_t n_actions() const { return n_classes + (has_help() ? 1 : 0); }
  std::size_t help_action() const { return n_classes; }
};

/// The task's true reward for acting on a context. For kPerturbedHelp this is
/// the clean ask-for-help reward; the noise exists only in training targets.
/// Novel contexts have no defined reward: asking for one throws.
double true_reward(const BanditTaskSpec& task, const BanditContext& context, std::size_t action);

/// Gaussian-cluster stand-in for an image dataset: class means are standard
/// normal in feature_dim dimensions, familiar contexts scatter around them
/// with the given spread, and novel contexts scatter around means displaced
/// by novel_shift along a random unit direction. Help flags are fair coin
/// flips. Everything is a deterministic function of the seed.
struct BanditDataset {
  std::vector<BanditContext> familiar;
  std::vector<BanditContext> novel;
};
BanditDataset make_dataset(std::size_t n_classes, std::size_t per_class, double cluster_spread,
                           double novel_shift, std::uint64_t seed, std::size_t feature_dim = 8);

/// Seeded subset of the contexts (without replacement) for data-extent
/// studies; fraction 1 returns the input order unchanged.
std::vector<BanditContext> training_subset(const std::vector<BanditContext>& contexts,
                                           double fraction, std::uint64_t seed);

enum class BanditRegime {
  kAllImages,    // uniform start over contexts, uniform next-context transitions
  kSingleImage,  // point-mass start at one context, identity transitions
};

/// Contexts become states of a discount-0 MDP. The true reward table is
/// emitted only when every context is familiar AND the caller wants it;
/// novel contexts have no defined reward, so their MDPs never carry a table.
struct BanditMdp {
  TabularMdp mdp;
  std::optional<RewardTable> reward;
};
BanditMdp to_bandit_mdp(const BanditTaskSpec& task, const std::vector<BanditContext>& contexts,
                        BanditRegime regime, std::size_t image_index = 0, bool emit_reward = true);

/// One-state discount-0 MDP (self-loop); with slice_reward this reproduces a
/// single-image run for one context exactly, since discount 0 decouples the
/// per-state learners.
TabularMdp point_mass_mdp(std::size_t n_actions);
RewardTable slice_reward(const RewardTable& full, std::size_t state);

/// Feature vector the reward models see: the context features, with the
/// help-availability flag appended for that task.
std::vector<double> context_features(const BanditTaskSpec& task, const BanditContext& context);

/// One training example per context: model input features, target = true
/// reward per action. kPerturbedHelp adds N(0, noise_sd^2) to every target
/// entry, once, from the seed's perturb stream.
std::vector<TrainExample> make_training_examples(const BanditTaskSpec& task,
                                                 const std::vector<BanditContext>& contexts,
                                                 std::uint64_t seed, double noise_sd = 0.1);

/// Per-output loss weights for training: 1/(a+1)^2 on risk-scaled
/// classification outputs, 1 elsewhere; empty when uniform.
std::vector<double> task_output_weights(const BanditTaskSpec& task);

/// Start-weighted behavior summary of a policy over labeled contexts.
struct CautionMetrics {
  double help_frequency = 0.0;  // 0 for tasks without a help action
  double mean_action_index = 0.0;
  double accuracy = 0.0;  // probability mass on the correct class
  std::vector<double> per_class_accuracy;
  Matrix class_action_freq;  // (class, action)
};
CautionMetrics caution_metrics(const StationaryPolicy& policy, const BanditTaskSpec& task,
                               const std::vector<BanditContext>& contexts);

/// Context CSV: header `label,help,f0..fD`, one context per row.
void write_contexts_csv(const std::filesystem::path& path,
                        const std::vector<BanditContext>& contexts);
std::vector<BanditContext> read_contexts_csv(const std::filesystem::path& path);

}  // namespace cautious
