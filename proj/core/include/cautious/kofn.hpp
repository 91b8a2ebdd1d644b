#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "cautious/ensemble.hpp"
#include "cautious/mdp.hpp"

namespace cautious {

/// Which policy a finished run reports.
enum class KofnOutput {
  kLast,     // the policy the final iteration trained on
  kBest,     // the snapshot with the highest estimated k-of-N value
  kSampled,  // a snapshot drawn uniformly over iterations
};

struct KofnConfig {
  std::size_t k = 1;
  std::size_t n = 1;           // rewards sampled per iteration
  std::size_t iterations = 100;
  KofnOutput output = KofnOutput::kLast;
  std::uint64_t seed = 0;
  std::size_t eval_repetitions = 1;  // k-of-N value estimates for kBest
  // Record-snapshot stride; 0 = every iteration for runs up to 200
  // iterations, ceil(T/200) beyond that.
  std::size_t snapshot_stride = 0;
};

struct KofnIterationRecord {
  std::size_t iteration = 0;            // 1-based
  std::vector<std::size_t> sampled;     // member indices in draw order
  std::vector<std::size_t> selected;    // k worst, ascending sample position
  double mixed_return = 0.0;            // start-weighted value on the k-worst mixture

  // Diagnostics kept in memory but not serialized.
  double mixing_error = 0.0;      // |value-of-mixture - mean of selected values|
  double max_regret_after = 0.0;  // bank's max cumulative regret after the update
};

struct KofnPolicySnapshot {
  std::size_t iteration = 0;  // 1-based; the policy that iteration trained on
  StationaryPolicy policy;
};

struct KofnRunRecord {
  std::vector<KofnIterationRecord> iterations;
  std::size_t output_iteration = 0;  // snapshot the run reported (1-based)

  // Policy iterates at the configured stride; in-memory only (the text log
  // carries the per-iteration lines, policies serialize as .pol files).
  std::vector<KofnPolicySnapshot> snapshots;
};

struct KofnResult {
  StationaryPolicy policy;
  KofnRunRecord record;
};

/// Positions of the k smallest entries; ties broken toward the earlier
/// position. Result is in ascending position order.
std::vector<std::size_t> worst_k_positions(const std::vector<double>& values, std::size_t k);

/// Uniform average of the given reward tables (all must share a shape); the
/// stated bound is the max of the parts' bounds.
RewardTable mix_rewards(const std::vector<const RewardTable*>& parts);

/// The k-of-N loop. Each iteration draws n rewards from the belief, values
/// the current policy on each, mixes the k worst into one pessimistic reward
/// and hands its action values to per-state regret matchers. The ensemble is
/// reshuffled from config.seed up front, so a run is a pure function of
/// (mdp, ensemble contents, config).
KofnResult run_kofn(const TabularMdp& mdp, RewardEnsemble& ensemble, const KofnConfig& config);

struct KofnValue {
  double mean = 0.0;
  double stderr = 0.0;  // 0 when repetitions == 1
};

/// Monte-Carlo estimate of the k-of-N objective for a fixed policy: sample n
/// members with replacement, average the k worst start-weighted values, and
/// repeat. Draws its own substreams from `seed`; the ensemble's queue state
/// is not touched.
KofnValue kofn_value(const TabularMdp& mdp, const RewardEnsemble& ensemble,
                     const StationaryPolicy& policy, std::size_t k, std::size_t n,
                     std::size_t repetitions, std::uint64_t seed);

/// Uniform mixture of the recorded snapshot policies (the average iterate the
/// regret bound speaks about). Throws if the record kept no snapshots.
StationaryPolicy average_snapshot_policy(const KofnRunRecord& record);

/// Cumulative regret of the run's policy sequence against a fixed competitor,
/// measured on each iteration's mixed reward: entry t is
/// sum_{u<=t} [ v0(competitor; mixed_u) - v0(pi_u; mixed_u) ]. `members` must
/// be the ensemble contents the run drew from (record indices resolve into
/// it).
std::vector<double> regret_curve(const TabularMdp& mdp, const std::vector<RewardTable>& members,
                                 const KofnRunRecord& record, const StationaryPolicy& competitor);

/// Run log: one line per iteration with tab-separated fields
/// iteration, sampled indices, selected indices, mixed return;
/// index lists are comma-joined. Doubles round-trip exactly.
void write_run_record(const std::filesystem::path& path, const KofnRunRecord& record);
KofnRunRecord read_run_record(const std::filesystem::path& path);

}  // namespace cautious
