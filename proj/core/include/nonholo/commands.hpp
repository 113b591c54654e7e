#pragma once

#include <optional>
#include <ostream>

#include "nonholo/experiment.hpp"

namespace nonholo::cli {

struct RunOptions {
    std::string out_dir = ".";
    bool force = false;
    std::optional<std::uint64_t> seed_override;
    int threads = 0; // 0: NONHOLO_THREADS env, else hardware concurrency
};

// Exit codes (stable contract): 0 success, 1 check failure, 2 config error,
// 3 numerical failure.
int run_simulate(const ExperimentConfig& cfg, const RunOptions& opts, std::ostream& log);
int run_floquet(const ExperimentConfig& cfg, const RunOptions& opts, std::ostream& log);
int run_scan(const ExperimentConfig& cfg, const RunOptions& opts, std::ostream& log);
int run_check(const ExperimentConfig& cfg, const RunOptions& opts, std::ostream& log);

/// Loads the config (empty path = defaults), runs the subcommand, and maps
/// exceptions onto the exit-code contract.
int dispatch(const std::string& subcommand, const std::string& config_path,
             const RunOptions& opts, std::ostream& log, std::ostream& err);

/// Shortest round-trip decimal representation.
std::string format_double(double x);

int resolve_threads(int requested);

} // namespace nonholo::cli
