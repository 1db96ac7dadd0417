// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace lookaround::cli {

// Process exit statuses.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitFormat = 4;

/// Parsed and range-checked command line. Zero/negative/empty values mean
/// "use the command's default".
struct Command {
  std::string name;  // gen, pretrain, train, eval, transfer, dump

  uint64_t seed = 0;
  std::string out;
  std::string data;
  std::string test_data;
  std::string checkpoint;
  int T = 0;
  std::string preset = "object";
  std::string family;
  int count = 0;
  int classes = 0;
  std::string class_range;  // "LO:HI"
  int updates = -1;
  int batch = 8;
  double lr = 0.0;
  double momentum = 0.9;
  double act_lr_scale = 0.0;
  double beta = 0.9;
  std::string mode = "sample";
};

struct HelpRequested {
  std::string text;
};

/// Throws HelpRequested for --help, and CLI11 parse errors for unknown
/// flags, missing required flags and out-of-range values.
Command parse_args(const std::vector<std::string>& args);

/// Runs a parsed command; returns the exit status. Progress and training
/// logs go to `out`, diagnostics to `err`.
int run_command(const Command& command, std::ostream& out, std::ostream& err);

/// parse_args + run_command with usage errors mapped to kExitUsage.
/// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lookaround::cli
