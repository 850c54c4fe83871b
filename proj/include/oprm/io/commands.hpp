#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "oprm/io/config.hpp"

namespace oprm::io {

/// Exit codes shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumeric = 3;

/// Commands write into `config.run.out` and a manifest.json there. They
/// throw UsageError for bad input and NumericError for divergence.
void cmd_train(const ExperimentConfig& config, std::ostream& log);
void cmd_eval(const ExperimentConfig& config, std::ostream& log);
void cmd_bench(const ExperimentConfig& config, std::ostream& log);
void cmd_oprm_run(const ExperimentConfig& config, std::ostream& log);
void cmd_gen_data(const ExperimentConfig& config, std::ostream& log);

/// Parses `args` (without the program name), runs the subcommand and maps
/// failures to exit codes: 2 usage/config, 3 numeric.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace oprm::io
