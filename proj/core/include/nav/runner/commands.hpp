// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "nav/runner/config.hpp"

namespace nav::runner {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitBadConfig = 2;
inline constexpr int kExitNoCheckpoint = 3;

// Command-line overrides on top of the config file.
struct CliOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  bool deterministic = false;
  std::optional<std::string> out;
  std::optional<std::int64_t> steps;
  std::optional<std::int64_t> checkpoint_every;
  std::optional<int> port;
  std::string checkpoint;  // eval: defaults to <out>/final.navw
  std::string log;         // analyze/replay/render-map: defaults to <out>/episodes.jsonl
  std::optional<int> episode;
  bool quiet = false;
};

// Loads the config and applies overrides: config < NAVW_OUT < flags.
ExperimentConfig resolve_config(const CliOptions& opt);

// Runs one of train | eval | analyze | replay | render-map | serve-env and
// returns the process exit code. Progress goes to `out`, errors to `err`.
int run_command(const std::string& command, const CliOptions& opt, std::ostream& out,
                std::ostream& err);

}  // namespace nav::runner
