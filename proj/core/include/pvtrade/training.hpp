#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pvtrade/features.hpp"
#include "pvtrade/market_data.hpp"
#include "pvtrade/mdp_env.hpp"
#include "pvtrade/policy.hpp"

namespace pvtrade {

/// alg1: volume-only policy against the per-period executor with Monte-Carlo
/// returns. alg2: (q, delta) policy in the MDP with a critic, GAE and
/// optional risk shaping.
enum class TrainMode { alg1, alg2 };
enum class RiskMode { none, cvar, entropic };

std::string to_string(TrainMode m);
TrainMode train_mode_from_string(const std::string& s);
std::string to_string(RiskMode m);
RiskMode risk_mode_from_string(const std::string& s);

struct RiskConfig {
  RiskMode mode = RiskMode::none;
  double alpha = 0.9;   ///< CVaR level
  double theta = 1e-3;  ///< entropic risk aversion, 1/€
};

struct TrainConfig {
  TrainMode mode = TrainMode::alg2;
  double gamma = 0.98;
  double lambda_gae = 0.95;
  double clip_eps = 0.2;
  double lr = 3e-3;
  double value_lr = 3e-3;
  double l2 = 1e-3;
  double entropy_coef = 1e-3;
  int epochs = 6;
  int steps_per_epoch = 1024;
  int n_ppo = 10;
  double sigma_init = 0.5;
  bool normalize_advantages = true;
  RiskConfig risk;

  void validate() const;
};

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> targets;
};

/// GAE over one episode. `values` holds V(s_0..s_{n-1}) plus the bootstrap
/// value V(s_n) as its last entry (0 past gate closure).
GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values, double gamma,
                      double lambda_gae);

/// ξ − 1/((1−α)N)·Σ(ξ − R)₊
double cvar_objective(std::span<const double> returns, double alpha, double xi);

struct CvarShaping {
  double xi_star = 0.0;
  double cvar = 0.0;               ///< objective value at xi_star
  std::vector<double> shaped;      ///< ξ* − (ξ* − R)₊/(1−α) per episode
};

/// Lower empirical (1−α)-quantile as ξ*. Throws InputError on empty input or α ∉ (0,1).
CvarShaping cvar_shaping(std::span<const double> returns, double alpha);

/// Per-episode actor weights from CVaR shaping: episodes at or below ξ* get
/// 1/(1−α), the rest 1, then normalized to mean 1.
std::vector<double> cvar_weights(std::span<const double> returns, double alpha);

/// exp(−θ·R) with a max-shift against overflow, normalized to mean 1.
std::vector<double> entropic_weights(std::span<const double> returns, double theta);

/// Per-step rollout storage; episodes are stored contiguously.
struct RolloutBuffer {
  std::vector<double> obs;           ///< size() × kFeatureDim
  std::vector<ActionVector> action;  ///< pre-clip
  std::vector<double> logp_old;
  std::vector<double> reward;
  std::vector<double> value;
  std::vector<std::uint8_t> done;
  std::vector<std::size_t> episode;  ///< episode index of each step
  std::vector<double> episode_return;  ///< discounted return per episode

  std::size_t size() const noexcept { return reward.size(); }
  std::span<const double> x(std::size_t t) const { return {obs.data() + t * kFeatureDim, kFeatureDim}; }
  void clear();
};

struct UpdateStats {
  double policy_loss = 0.0;  ///< −(clipped surrogate + entropy bonus − ℓ2)
  double value_loss = 0.0;
  double mean_ratio = 1.0;
  double entropy = 0.0;
  bool ratio_alarm = false;  ///< mean ratio left [1−3ε, 1+3ε]
};

/// N_ppo full-batch gradient steps on the clipped surrogate (ascent) and the
/// critic's squared error (descent). `step_weights` multiplies each sample's
/// surrogate term. The log-sigma is only updated when `learn_sigma`.
/// Throws TrainingError on a non-finite gradient.
std::vector<UpdateStats> ppo_update(PolicyParams& params, const RolloutBuffer& buffer,
                                    std::span<const double> advantages, std::span<const double> targets,
                                    std::span<const double> step_weights, const TrainConfig& config,
                                    bool learn_sigma = true, bool learn_critic = true);

/// Data ready for rollouts: the dataset and its normalized, ablated features.
struct ModelInputs {
  std::shared_ptr<const Dataset> data;
  std::shared_ptr<const FeatureMatrix> features;
  Normalizer normalizer;
};

/// Builds features for `data` and fits the normalizer on rows
/// [kFeatureWarmup, fit_end), i.e. on the training period only.
ModelInputs prepare_inputs(const Dataset& data, const FeatureOptions& options, std::size_t fit_end,
                           std::span<const AblationGroup> ablate = {});

/// Same, reusing a normalizer fitted elsewhere.
ModelInputs prepare_inputs(const Dataset& data, const FeatureOptions& options, const Normalizer& normalizer,
                           std::span<const AblationGroup> ablate = {});

/// Episode starts (local midnight rows) whose whole day lies in [first_row, end_row).
std::vector<std::size_t> episode_starts_in(const Dataset& data, std::size_t first_row, std::size_t end_row);

struct CurvePoint {
  int epoch = 0;
  std::uint64_t seed = 0;
  double mean_return = 0.0;  ///< mean undiscounted daily return of the mean policy on the training days
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double mean_ratio = 1.0;
  double entropy = 0.0;
};

struct TrainResult {
  PolicyParams params;
  std::vector<CurvePoint> curve;
};

/// Trains one seed on the episodes starting at `starts`. Deterministic given
/// (inputs, starts, config, env, seed).
TrainResult train(const ModelInputs& inputs, std::span<const std::size_t> starts, const EnvConfig& env,
                  const TrainConfig& config, std::uint64_t seed);

/// A trained policy with everything needed to rebuild its inputs.
struct TrainedModel {
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::alg2;
  FeatureOptions features;
  std::vector<AblationGroup> ablate;
  Normalizer normalizer;
  PolicyParams params;
  std::vector<CurvePoint> curve;
};

/// Fits the normalizer and trains on the days that end before `train_end`.
TrainedModel train_model(const Dataset& data, std::size_t train_end, const FeatureOptions& features,
                         std::span<const AblationGroup> ablate, const EnvConfig& env, const TrainConfig& config,
                         std::uint64_t seed);

/// Volume-only reward of one hour: realized stage profit of the executor run on
/// the recommendation `a_rec`, deciding with the last observed imbalance price.
double alg1_hour_reward(const Dataset& data, std::size_t row, double a_rec, const ExecParams& exec);

/// Mean undiscounted daily return of the deterministic policy over `starts`.
double evaluate_mean_return(const ModelInputs& inputs, const EnvConfig& env, const PolicyParams& params,
                            TrainMode mode, std::span<const std::size_t> starts, std::uint64_t draw_seed);

}  // namespace pvtrade
