#pragma once

#include <filesystem>
#include <string>

#include "cautious/mdp.hpp"

namespace cautious {

// Text formats. Each file starts with a magic+version line so readers can
// fail fast on the wrong kind of file:
//
//   CAUTIOUS-MDP v1        n_states n_actions / discount / initial row /
//                          one transition row per (s,a) in row-major order
//   CAUTIOUS-REW v1        n_states n_actions / bound / one row per (s,a)
//   CAUTIOUS-POL v1        n_states n_actions / one row per state
//
// Doubles are written via shortest round-trip formatting, so write/read is
// bit-exact and reruns of a deterministic pipeline produce identical bytes.

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

/// Strict double parser; throws std::runtime_error if `text` is not a full,
/// finite double literal.
double parse_double(const std::string& text);

void write_mdp(const std::filesystem::path& path, const TabularMdp& mdp);
TabularMdp read_mdp(const std::filesystem::path& path);

void write_reward(const std::filesystem::path& path, const RewardTable& reward);
RewardTable read_reward(const std::filesystem::path& path);

void write_policy(const std::filesystem::path& path, const StationaryPolicy& policy);
StationaryPolicy read_policy(const std::filesystem::path& path);

/// Writes `contents` to `path` via a sibling temp file and rename, so readers
/// never observe a partially written file.
void atomic_write_text(const std::filesystem::path& path, const std::string& contents);

}  // namespace cautious
