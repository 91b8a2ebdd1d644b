#pragma once

#include "cautious/manifest.hpp"

namespace cautious {

// Subcommand bodies. Each validates its manifest (throwing ConfigError for
// bad input), does the work, and writes outputs atomically; the CLI wrapper
// maps ConfigError to the usage exit code and anything else to the runtime
// one. All outputs are deterministic functions of the manifest.

void cmd_train_ensemble(const Manifest& manifest);
void cmd_run_kofn(const Manifest& manifest);
void cmd_baseline(const Manifest& manifest);
void cmd_gridworld_stats(const Manifest& manifest);
void cmd_bandit_metrics(const Manifest& manifest);

}  // namespace cautious
