#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pvtrade/config.hpp"
#include "pvtrade/evaluation.hpp"

namespace pvtrade::app {

/// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitConfig = 2,
  kExitData = 3,
  kExitRuntime = 4,
};

struct RunOptions {
  std::filesystem::path out = "out";
  std::filesystem::path data;         ///< CSV directory; empty: config's data.dir or generate in memory
  std::filesystem::path checkpoints;  ///< empty: <out>/checkpoints
  std::filesystem::path scenarios;    ///< empty: config's evaluation.scenarios or the baseline cell
  std::filesystem::path checkpoint;   ///< bench: explicit checkpoint file
  std::optional<std::size_t> steps;   ///< bench: overrides evaluation.bench_steps
  bool log_trajectories = false;
};

/// Applies command-line overrides (they win over file values).
void apply_overrides(AppConfig& config, const std::optional<std::vector<std::uint64_t>>& seeds,
                     const std::optional<int>& workers);

/// Loads CSVs from `dir` when given, else from config.data.dir, else generates.
Dataset obtain_dataset(const AppConfig& config, const std::filesystem::path& dir);

/// Row index of the first evaluation hour.
std::size_t split_row(const Dataset& data, const AppConfig& config);

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, std::uint64_t seed);

/// Writes market.csv and pv.csv for `seed` into `out`.
void cmd_generate(const AppConfig& config, std::uint64_t seed, const std::filesystem::path& out);

/// Trains every configured seed; writes checkpoints/ and learning_curve.csv.
std::vector<TrainedModel> cmd_train(const AppConfig& config, const RunOptions& opt);

/// Evaluates the scenario grid; writes scenarios.csv, scenario_seeds.csv and
/// trading_pattern.csv (plus trajectories when requested).
std::vector<ScenarioResult> cmd_evaluate(const AppConfig& config, const RunOptions& opt);

LatencyStats cmd_bench(const AppConfig& config, const RunOptions& opt);

std::vector<WeightReportRow> cmd_report(const AppConfig& config, const RunOptions& opt);

/// Full command-line entry point; returns the process exit code.
int run(int argc, char** argv);

}  // namespace pvtrade::app
