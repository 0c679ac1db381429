#pragma once

#include "optrot/cli/config.hpp"

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace optrot::cli {

struct RunOptions {
  bool force = false;
};

// Each command validates the whole config before any heavy work, takes the
// output directory lock and writes its artifacts. Errors surface as
// optrot exceptions; run_cli maps them to exit codes.
void cmd_generate(const ExperimentConfig& cfg, const RunOptions& run, std::ostream& log);
void cmd_learn(const ExperimentConfig& cfg, const RunOptions& run, std::ostream& log);
void cmd_quantize(const ExperimentConfig& cfg, const RunOptions& run, std::ostream& log);
void cmd_bounds(const ExperimentConfig& cfg, const RunOptions& run, std::ostream& log);
void cmd_compare(const ExperimentConfig& cfg, const RunOptions& run, std::ostream& log);

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitNumerical = 3, kExitIo = 4 };

// Full command line entry point, argv[0] included.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Two-sided exact binomial sign test p-value for `wins` out of `n` trials.
double sign_test_p_value(std::size_t wins, std::size_t n);

}  // namespace optrot::cli
