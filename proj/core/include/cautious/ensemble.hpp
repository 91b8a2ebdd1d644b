#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "cautious/mdp.hpp"

namespace cautious {

/// An ordered collection of reward hypotheses representing a belief over the
/// true reward. Members keep stable indices; draw() hands out indices so
/// callers can log which hypotheses an iteration saw.
///
/// Two draw disciplines:
///  - without replacement: members are consumed in queue order (shuffle first
///    for a random order); drawing past the end throws, naming how many were
///    left, so a run that misjudged its budget fails loudly.
///  - with replacement: a seeded uniform stream over indices; never exhausts.
class RewardEnsemble {
 public:
  RewardEnsemble(std::vector<RewardTable> members, bool with_replacement,
                 std::uint64_t draw_seed = 0);

  std::size_t size() const { return members_.size(); }
  const RewardTable& member(std::size_t index) const { return members_.at(index); }
  bool with_replacement() const { return with_replacement_; }

  /// Largest stated bound across members; the regret analysis uses one U for
  /// the whole belief.
  double shared_bound() const;

  /// Random permutation of the queue; also resets the cursor and reseeds the
  /// with-replacement stream, so a run's draws depend only on this seed.
  void shuffle(std::uint64_t seed);

  /// Next `count` member indices under the ensemble's draw discipline.
  std::vector<std::size_t> draw(std::size_t count);

  /// Members not yet consumed (== size() forever when drawing with replacement).
  std::size_t remaining() const;

 private:
  std::vector<RewardTable> members_;
  std::vector<std::size_t> order_;  // queue of member indices
  std::size_t cursor_ = 0;
  bool with_replacement_;
  std::mt19937_64 engine_;
};

/// Synthetic belief around a base reward: member m adds zero-mean Gaussian
/// noise drawn independently per (s, a, s') entry with per-(state, action)
/// standard deviation, then clips into [-U, U] with
/// U = max|base| + 6 * max(noise_scale). Useful for tests and for exercising
/// the pipeline without a learned model.
std::vector<RewardTable> synthetic_belief(const RewardTable& base, const Matrix& noise_scale,
                                          std::size_t n_members, std::uint64_t seed);

/// Elementwise average of the members; the bound is the members' shared bound.
RewardTable mean_reward(const std::vector<RewardTable>& members);
RewardTable mean_reward(const RewardEnsemble& ensemble);

/// Directory layout: `manifest.txt` holds a header line then one member
/// filename per line in queue order; each member is a CAUTIOUS-REW file in
/// the same directory.
void write_ensemble_dir(const std::filesystem::path& dir, const std::vector<RewardTable>& members);
void write_ensemble_dir(const std::filesystem::path& dir, const RewardEnsemble& ensemble);
std::vector<RewardTable> read_ensemble_dir(const std::filesystem::path& dir);

}  // namespace cautious
