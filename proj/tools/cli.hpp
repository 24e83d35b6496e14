// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace CLI {
class App;
}

namespace arthdr::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

struct Options;

/// The `arthdr` command tree. Option values are bound to an internal state
/// that run() consumes.
class Cli {
 public:
  Cli();
  ~Cli();
  Cli(const Cli&) = delete;
  Cli& operator=(const Cli&) = delete;

  CLI::App& app();

  /// Parses `args` (without the program name) and executes the subcommand.
  int run(std::vector<std::string> args, std::ostream& out, std::ostream& err);

 private:
  std::unique_ptr<CLI::App> app_;
  std::unique_ptr<Options> opts_;
};

/// Convenience wrapper around a fresh Cli.
int run(std::vector<std::string> args, std::ostream& out, std::ostream& err);

}  // namespace arthdr::cli
