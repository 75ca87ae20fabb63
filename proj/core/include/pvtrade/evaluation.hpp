#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pvtrade/baselines.hpp"
#include "pvtrade/training.hpp"

namespace pvtrade {

/// One cell of the scenario grid. Defaults are the baseline cell.
struct ScenarioConfig {
  std::string name = "Baseline";
  double liquidity_scale = 1.0;  ///< multiplies eval-period depths
  double imbalance_shift = 0.0;  ///< eval-period p_im shift in training-σ units
  std::vector<AblationGroup> ablate;
  ForecastHorizon horizon = ForecastHorizon::h5;
  std::optional<double> cvar_alpha;  ///< train with CVaR shaping at this level

  void validate() const;
};

enum class AblationMode { retrain, zero };

std::string to_string(AblationMode m);
AblationMode ablation_mode_from_string(const std::string& s);

/// True when the cell needs policies trained under its own settings rather
/// than the baseline policies.
bool needs_retrain(const ScenarioConfig& s, AblationMode mode, ForecastHorizon default_horizon);

/// Everything an evaluation run shares across cells.
struct EvalSetup {
  std::shared_ptr<const Dataset> data;
  std::size_t boundary = 0;  ///< first row of the evaluation period
  EnvConfig env;
  double sign_spread_threshold = 4.0;
  double cvar_level = 0.05;
};

/// A decision rule: a trained policy or a baseline.
struct Strategy {
  const PolicyParams* policy = nullptr;
  BaselineKind baseline;
};

struct StrategyRun {
  double profit = 0.0;        ///< €, DA revenue + intraday cash − costs + settlement
  double da_revenue = 0.0;
  int trades = 0;             ///< rounds with a nonzero fill
  std::vector<double> daily_profit;  ///< €
  std::vector<Trajectory> trajectories;  ///< filled when requested
};

/// Runs `strategy` over the days at `starts` with matched draws for `draw_seed`.
StrategyRun run_strategy(const ModelInputs& inputs, std::span<const std::size_t> starts, const EnvConfig& env,
                         const Strategy& strategy, std::uint64_t draw_seed, bool keep_trajectories = false);

/// Applies the cell's liquidity scale and imbalance shift to rows >= boundary.
/// `p_im_sigma` is the training-period std of the imbalance price.
Dataset scenario_dataset(const Dataset& data, std::size_t boundary, const ScenarioConfig& s, double p_im_sigma);

/// Population std of p_im over rows [0, boundary).
double imbalance_sigma(const Dataset& data, std::size_t boundary);

struct SeedOutcome {
  std::uint64_t seed = 0;
  double fdrl = 0.0;  ///< €
  double spot_only = 0.0;
  double forecast_tracking = 0.0;
  double sign_spread = 0.0;
  double oracle = 0.0;
  int trades = 0;
  double cvar = 0.0;  ///< € per day
};

struct MetricsReport {
  std::string name;
  double profit_keur = 0.0;
  double ci95_keur = 0.0;
  double spot_only_keur = 0.0;
  double uplift_keur = 0.0;
  double trades = 0.0;
  double cvar5_keur = 0.0;
};

struct ScenarioResult {
  MetricsReport metrics;
  std::vector<SeedOutcome> per_seed;
  std::vector<Trajectory> trajectories;  ///< FDRL trajectories of the first seed, when requested
};

/// Evaluates one cell: every model (one per seed) on the cell's eval data,
/// with the four baselines on the same matched draws.
ScenarioResult run_scenario(const EvalSetup& setup, const ScenarioConfig& scenario,
                            std::span<const TrainedModel> models, bool keep_trajectories = false);

/// Mean of the worst ⌈level·N⌉ daily profits; needs N >= 20.
double compute_cvar_daily(std::span<const double> daily_profits, double level = 0.05);

/// t_{0.975,n−1}·s/√n with the sample std; needs n >= 2.
double ci95_halfwidth(std::span<const double> values);

struct LatencyStats {
  std::size_t n_steps = 0;
  std::size_t warmup = 0;
  double mean_ms = 0.0;
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  double p99_ms = 0.0;
  double p999_ms = 0.0;
  double episode_ms = 0.0;       ///< mean wall time per full episode
  double throughput = 0.0;       ///< episodes per second
  double steps_per_episode = 0.0;
};

inline constexpr std::size_t kMinLatencySteps = 1000;

/// Times mean_action + step decisions over whole episodes cycling through
/// `starts`. Throws InputError when n_steps < 1000.
LatencyStats latency_benchmark(const PolicyParams& params, const ModelInputs& inputs,
                               std::span<const std::size_t> starts, const EnvConfig& env, std::size_t n_steps,
                               std::size_t warmup = 1000);

struct TradingPattern {
  std::array<int, 24> hourly_trades{};
  int market_orders = 0;
  int limit_orders = 0;
  double market_share = 0.0;
  double limit_share = 0.0;
  std::vector<double> sizes;  ///< |fill| of every nonzero fill, ascending
  std::optional<double> median_size;
  std::vector<int> size_histogram;  ///< counts per 0.5 MWh bin
};

inline constexpr double kSizeBinWidth = 0.5;

TradingPattern trading_pattern_report(std::span<const Trajectory> trajectories);

struct WeightReportRow {
  int rank = 0;  ///< 1-based within the action dimension
  int action = 0;
  std::string feature;
  double mean = 0.0;
  double std = 0.0;  ///< sample std across seeds, 0 for one seed
};

/// Per-feature mean and across-seed std of the actor weights, sorted by |mean|
/// descending within each action dimension.
std::vector<WeightReportRow> weight_report(std::span<const PolicyParams> per_seed);

void write_scenario_csv(const std::filesystem::path& path, std::span<const ScenarioResult> rows,
                        const std::string& provenance);
void write_seed_csv(const std::filesystem::path& path, std::span<const ScenarioResult> rows,
                    const std::string& provenance);
void write_latency_csv(const std::filesystem::path& path, const LatencyStats& s, const std::string& provenance);
void write_weights_csv(const std::filesystem::path& path, std::span<const WeightReportRow> rows,
                       const std::string& provenance);
void write_curve_csv(const std::filesystem::path& path, std::span<const CurvePoint> points,
                     const std::string& provenance);
void write_pattern_csv(const std::filesystem::path& path, const TradingPattern& p, const std::string& provenance);

}  // namespace pvtrade
