#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pvtrade/execution.hpp"
#include "pvtrade/features.hpp"
#include "pvtrade/market_data.hpp"

namespace pvtrade {

/// Number of hourly trading rounds per episode (one delivery day).
inline constexpr int kRoundsPerEpisode = 24;

struct MidpriceParams {
  double kappa_rev = 0.3;  ///< mean-reversion rate per hour
  double nu = 1.0;         ///< diffusion, €/MWh/√h
  double jump_std = 0.0;   ///< zero-mean Gaussian jump, €/MWh
};

/// One Euler step (Δt = 1 h) of the mean-reverting mid-price.
double midprice_step(double m, double m_bar, const MidpriceParams& p, double diffusion_draw,
                     double jump_draw);

/// Stationary variance of the discrete recursion above.
double midprice_stationary_variance(const MidpriceParams& p);

/// Expected remaining rounds 1/(1−γ); throws DomainError unless 0 < γ < 1.
double discount_horizon(double gamma);

/// Single-price settlement of residual `x` at price `p` under the surplus
/// convention: a surplus earns p·x, a shortfall pays.
inline double terminal_settlement(double x, double p) { return p * x; }

enum class QuoteSource { dataset, simulated };

std::string to_string(QuoteSource q);
QuoteSource quote_source_from_string(const std::string& s);

struct EnvConfig {
  double q_lo = -5.0;
  double q_hi = 5.0;
  double delta_lo = -2.0;
  double delta_hi = 4.0;
  double lambda_inv = 0.1;  ///< λ_ℓ, weight of the expected-imbalance shaping term
  ExecParams exec;
  FillParams fill;
  MidpriceParams midprice;
  QuoteSource quote_source = QuoteSource::dataset;
  /// Route the volume through the per-period executor with the action as the
  /// recommendation (the deployed policy); baselines submit volumes directly.
  bool route_through_executor = true;

  void validate() const;
};

struct MdpAction {
  double q = 0.0;      ///< signed volume, + sell
  double delta = 0.0;  ///< limit-price offset, <= 0 crosses the spread
};

struct MdpState {
  HourIndex hour = 0;   ///< delivery hour traded this round
  double x = 0.0;       ///< open position ĝ − g_da for the delivery hour
  double g_hat = 0.0;
  double sigma = 0.0;   ///< recent forecast error std
  double p_da = 0.0;
  double m = 0.0;       ///< intraday mid-price
  Book book;            ///< microstructure ψ
  double p_im_last = 0.0;  ///< balancing context ζ: last observed imbalance price
  RegulationState regulation_last = RegulationState::balanced;
  double g_da = 0.0;
  int tau = 0;          ///< rounds left until the last gate closure of the day
};

/// Exogenous randomness consumed by one step.
struct StepDraws {
  double fill_u = 0.5;
  double mid_normal = 0.0;
  double jump_normal = 0.0;
};

/// Draws shared by every strategy evaluated under the same seed.
StepDraws matched_draws(std::uint64_t seed, HourIndex hour);

struct StepOutcome {
  MdpState next_state;
  double reward = 0.0;
  double executed = 0.0;   ///< q̃, + sell
  double price = 0.0;      ///< p̃
  OrderType order_type = OrderType::market;
  bool traded = false;
  double cost = 0.0;
  double cash = 0.0;        ///< q̃·p̃ − c(q̃)
  double residual = 0.0;    ///< realized imbalance e of the delivery hour
  double settlement = 0.0;  ///< p_im·e
  double shaping = 0.0;     ///< −λ_ℓ·p̂_im·(x − q̃), not a cash flow
  double forecast_update = 0.0;  ///< ε_{t+1}
  double da_revenue = 0.0;  ///< p_da·g_da, constant per hour
  bool done = false;
};

/// Realized values for the current delivery hour; only the oracle may read it.
struct Foresight {
  double g_act = 0.0;
  double p_im = 0.0;
  StepDraws draws;
};

/// Finite-horizon environment over one delivery day of a dataset.
///
/// Round k trades delivery hour k of the day against the book observed at its
/// cutoff; the hour's residual settles at its imbalance price when the round
/// closes. The open position resets to the next hour's forecast deviation,
/// with the difference booked as the forecast update ε so that
/// x' = x − q̃ − ε holds exactly.
class Environment {
 public:
  Environment(std::shared_ptr<const Dataset> data, std::shared_ptr<const FeatureMatrix> features,
              EnvConfig config);

  /// Starts the episode whose first delivery hour is row `first_row`.
  /// Throws WindowError when the row lacks warm-up history or a full day.
  const MdpState& reset(std::size_t first_row);

  StepOutcome step(const MdpAction& action, const StepDraws& draws);

  const MdpState& state() const noexcept { return state_; }
  bool done() const noexcept { return done_; }
  std::size_t current_row() const noexcept { return row_; }

  /// Normalized features for the current delivery hour.
  std::span<const double, kFeatureDim> observation() const;

  Foresight foresight(const StepDraws& draws) const;

  /// Feasible volume box for the current round.
  TradeCaps caps() const;

  const EnvConfig& config() const noexcept { return config_; }
  EnvConfig& mutable_config() noexcept { return config_; }
  const Dataset& data() const noexcept { return *data_; }

  /// Rows at local midnight with a full day and warm-up history.
  std::vector<std::size_t> episode_starts() const;

  /// Upper bound on |reward| for any clipped action on this dataset.
  double reward_bound() const;

 private:
  MdpState make_state(std::size_t row, int tau, double mid) const;
  Book book_at(std::size_t row, double mid) const;

  std::shared_ptr<const Dataset> data_;
  std::shared_ptr<const FeatureMatrix> features_;
  EnvConfig config_;
  MdpState state_{};
  std::size_t first_row_ = 0;
  std::size_t row_ = 0;
  double m_bar_ = 0.0;
  bool done_ = true;
};

/// One logged round, for debugging and trading-pattern analysis.
struct TrajectoryStep {
  MdpState state;
  MdpAction action;
  StepOutcome outcome;
};

using Trajectory = std::vector<TrajectoryStep>;

void write_trajectory_csv(const std::filesystem::path& path, std::span<const Trajectory> trajectories,
                          const std::string& provenance = {});

}  // namespace pvtrade
