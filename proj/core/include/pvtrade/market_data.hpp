#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pvtrade/calendar.hpp"

namespace pvtrade {

enum class RegulationState { balanced = 0, up = 1, down = 2 };

std::string to_string(RegulationState s);
RegulationState regulation_from_string(const std::string& s);

/// One hour of exogenous market data for the delivery hour `timestamp`.
///
/// Quotes and depths are the intraday book observed for that product before
/// its trading cutoff. `p_im` and `regulation_state` are only revealed after
/// delivery.
struct MarketRecord {
  HourIndex timestamp = 0;
  double p_da = 0.0;
  double p_id_bid = 0.0;
  double p_id_ask = 0.0;
  double p_im = 0.0;
  double bid_depth = 0.0;  ///< MWh available to sell into
  double ask_depth = 0.0;  ///< MWh available to buy from
  RegulationState regulation_state = RegulationState::balanced;

  bool operator==(const MarketRecord&) const = default;
};

/// One hour of plant data. Forecast fields target the delivery hour
/// `timestamp` and were issued 1 h, 5 h and day-ahead before it.
struct PvRecord {
  HourIndex timestamp = 0;
  double g_act = 0.0;
  double g_da = 0.0;
  double forecast_1h = 0.0;
  double forecast_5h = 0.0;
  double forecast_da = 0.0;
  double ghi = 0.0;
  double cloud_cover = 0.0;
  double temp_2m = 0.0;

  bool operator==(const PvRecord&) const = default;
};

struct Dataset {
  std::vector<MarketRecord> market;
  std::vector<PvRecord> pv;

  std::size_t size() const noexcept { return market.size(); }
  HourIndex first_hour() const { return market.front().timestamp; }
};

struct PriceModel {
  double mean = 60.0;           ///< €/MWh
  double ar_coef = 0.95;        ///< hourly AR(1) coefficient of the residual
  double volatility = 8.0;      ///< stationary std of the AR(1) residual, €/MWh
  double diurnal_amplitude = 12.0;
  double seasonal_amplitude = 10.0;
  double solar_depression = 15.0;  ///< €/MWh price drop at clear-sky peak
};

struct SpreadParams {
  double spread_mean = 4.0;    ///< median bid/ask spread, €/MWh
  double spread_vol = 0.25;    ///< lognormal log-std of the spread
  double mid_noise = 1.5;      ///< std of mid − p_da, €/MWh
  double mid_noise_bound = 3.0;  ///< noise clipped at ± bound·std
  double depth_mean = 20.0;    ///< median depth d̄, MWh
  double depth_vol = 0.4;
  double depth_floor = 0.5;
};

struct ImbalanceModel {
  double persistence = 0.85;    ///< AR(1) coefficient of the system imbalance signal
  double coupling = 0.6;        ///< loading of the plant's forecast error on the signal
  double threshold = 0.5;       ///< |signal| above this triggers regulation
  double up_premium = 8.0;      ///< €/MWh added to p_da under up-regulation
  double down_discount = 15.0;  ///< €/MWh subtracted under down-regulation
  double noise = 3.0;
};

struct GeneratorConfig {
  double capacity = 10.0;         ///< MW
  double capacity_factor = 0.125;
  double sigma_da = 0.15;         ///< fraction of capacity
  double sigma_id = 0.08;
  double horizon_correlation = 0.7;
  double error_persistence = 0.8;
  double latitude = 55.7;
  double longitude = 12.5;
  int start_year = 2023;
  int years = 2;
  PriceModel price;
  SpreadParams spread;
  ImbalanceModel imbalance;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Standard-normal draws feeding derive_quotes.
struct QuoteNoise {
  double spread = 0.0;
  double mid = 0.0;
  double bid_depth = 0.0;
  double ask_depth = 0.0;
};

struct Quotes {
  double bid = 0.0;
  double ask = 0.0;
  double bid_depth = 0.0;
  double ask_depth = 0.0;
};

Quotes derive_quotes(double p_da, const SpreadParams& params, const QuoteNoise& noise);

/// Clear-sky global horizontal irradiance, W/m², for the hour starting at `h`
/// (evaluated at the hour midpoint).
double clear_sky_ghi(HourIndex h, double latitude_deg, double longitude_deg);

Dataset generate_synthetic_dataset(const GeneratorConfig& config, std::uint64_t seed);

/// Validates every record against the type invariants; throws DataError with
/// the 1-based offending row.
void validate_dataset(const Dataset& data, double capacity = 0.0);

struct DatasetSplit {
  Dataset train;
  Dataset eval;
  HourIndex boundary = 0;
};

DatasetSplit split_chronological(const Dataset& data, HourIndex boundary);

/// Hour index of January 1st, 00:00 of the second generated year.
HourIndex second_year_start(const Dataset& data);

}  // namespace pvtrade
