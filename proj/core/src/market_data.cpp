#include "pvtrade/market_data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <fmt/format.h>

#include "pvtrade/errors.hpp"

namespace pvtrade {

namespace {

constexpr double kPi = std::numbers::pi;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Independent, reproducible stream per generator component.
std::mt19937_64 component_stream(std::uint64_t seed, std::uint64_t tag) {
  return std::mt19937_64{splitmix64(seed ^ splitmix64(tag))};
}

class Ar1 {
 public:
  Ar1(double coef, double stationary_std) : coef_(coef), innov_(stationary_std * std::sqrt(1.0 - coef * coef)) {}
  double next(double z) {
    state_ = coef_ * state_ + innov_ * z;
    return state_;
  }

 private:
  double coef_;
  double innov_;
  double state_ = 0.0;
};

double horizon_sigma(double sigma_id, double sigma_da, double hours) {
  return sigma_id + (sigma_da - sigma_id) * (hours - 1.0) / 23.0;
}

void require(bool ok, const char* field, const std::string& what) {
  if (!ok) throw ConfigError(field, what);
}

}  // namespace

std::string to_string(RegulationState s) {
  switch (s) {
    case RegulationState::up: return "up";
    case RegulationState::down: return "down";
    case RegulationState::balanced: return "balanced";
  }
  return "balanced";
}

RegulationState regulation_from_string(const std::string& s) {
  if (s == "up") return RegulationState::up;
  if (s == "down") return RegulationState::down;
  if (s == "balanced") return RegulationState::balanced;
  throw InputError("unknown regulation_state '" + s + "'");
}

void GeneratorConfig::validate() const {
  require(std::isfinite(capacity) && capacity > 0.0, "capacity", "must be > 0");
  require(capacity_factor > 0.0 && capacity_factor < 1.0, "capacity_factor", "must lie in (0, 1)");
  require(sigma_id >= 0.0, "sigma_id", "must be >= 0");
  require(sigma_da >= sigma_id, "sigma_da", "must be >= sigma_id");
  require(horizon_correlation >= 0.0 && horizon_correlation <= 1.0, "horizon_correlation",
          "must lie in [0, 1]");
  require(error_persistence >= 0.0 && error_persistence < 1.0, "error_persistence",
          "must lie in [0, 1)");
  require(latitude > -90.0 && latitude < 90.0, "latitude", "must lie in (-90, 90)");
  require(years >= 1, "years", "must be >= 1");
  require(price.ar_coef >= 0.0 && price.ar_coef < 1.0, "price.ar_coef", "must lie in [0, 1)");
  require(price.volatility >= 0.0, "price.volatility", "must be >= 0");
  require(spread.spread_mean >= 0.0, "spread.spread_mean", "must be >= 0");
  require(spread.spread_vol >= 0.0, "spread.spread_vol", "must be >= 0");
  require(spread.mid_noise >= 0.0, "spread.mid_noise", "must be >= 0");
  require(spread.depth_mean > 0.0, "spread.depth_mean", "must be > 0");
  require(spread.depth_floor >= 0.0, "spread.depth_floor", "must be >= 0");
  require(imbalance.persistence >= 0.0 && imbalance.persistence < 1.0, "imbalance.persistence",
          "must lie in [0, 1)");
  require(imbalance.threshold >= 0.0, "imbalance.threshold", "must be >= 0");
  require(imbalance.noise >= 0.0, "imbalance.noise", "must be >= 0");
}

Quotes derive_quotes(double p_da, const SpreadParams& params, const QuoteNoise& noise) {
  const double bound = params.mid_noise_bound;
  const double mid = p_da + params.mid_noise * std::clamp(noise.mid, -bound, bound);
  const double spread = params.spread_mean * std::exp(params.spread_vol * noise.spread);
  Quotes q;
  q.bid = mid - 0.5 * spread;
  q.ask = mid + 0.5 * spread;
  q.bid_depth = std::max(params.depth_floor, params.depth_mean * std::exp(params.depth_vol * noise.bid_depth));
  q.ask_depth = std::max(params.depth_floor, params.depth_mean * std::exp(params.depth_vol * noise.ask_depth));
  return q;
}

double clear_sky_ghi(HourIndex h, double latitude_deg, double longitude_deg) {
  const double doy = day_of_year(h);
  const double solar_time = hour_of_day(h) + 0.5 + longitude_deg / 15.0;
  const double decl = 23.45 * kPi / 180.0 * std::sin(2.0 * kPi * (284.0 + doy) / 365.0);
  const double lat = latitude_deg * kPi / 180.0;
  const double hour_angle = (solar_time - 12.0) * 15.0 * kPi / 180.0;
  const double cos_zenith =
      std::sin(lat) * std::sin(decl) + std::cos(lat) * std::cos(decl) * std::cos(hour_angle);
  if (cos_zenith <= 0.0) return 0.0;
  // Haurwitz clear-sky model
  return 1098.0 * cos_zenith * std::exp(-0.057 / cos_zenith);
}

Dataset generate_synthetic_dataset(const GeneratorConfig& config, std::uint64_t seed) {
  config.validate();

  const HourIndex start = hour_index_from_ymd(config.start_year, 1, 1, 0);
  const std::size_t n = static_cast<std::size_t>(8760) * static_cast<std::size_t>(config.years);
  const double cap = config.capacity;

  std::normal_distribution<double> normal(0.0, 1.0);

  // Irradiance and weather
  std::vector<double> clear_sky(n), ghi(n), cloud(n), temp(n);
  {
    auto rng = component_stream(seed, 1);
    Ar1 cloud_latent(0.95, 1.0);
    Ar1 temp_noise(0.9, 2.0);
    for (std::size_t t = 0; t < n; ++t) {
      const HourIndex h = start + static_cast<HourIndex>(t);
      clear_sky[t] = clear_sky_ghi(h, config.latitude, config.longitude);
      const double z = cloud_latent.next(normal(rng));
      cloud[t] = 1.0 / (1.0 + std::exp(-(1.5 * z + 0.3)));
      const double noise = std::exp(0.1 * normal(rng) - 0.005);
      ghi[t] = clear_sky[t] > 0.0 ? clear_sky[t] * (1.0 - 0.75 * std::pow(cloud[t], 3.0)) * noise : 0.0;
      const double season = std::cos(2.0 * kPi * (day_of_year(h) - 200.0) / 365.0);
      const double diurnal = std::cos(2.0 * kPi * (hour_of_day(h) - 14.0) / 24.0);
      temp[t] = 9.0 + 8.0 * season + 3.5 * diurnal + temp_noise.next(normal(rng));
    }
  }

  // Generation scaled so the mean matches the target capacity factor exactly
  // (up to bisection tolerance), respecting the capacity clip.
  std::vector<double> g_act(n);
  {
    auto mean_cf = [&](double scale) {
      double s = 0.0;
      for (std::size_t t = 0; t < n; ++t) s += std::min(cap, scale * ghi[t] / 1000.0 * cap);
      return s / (static_cast<double>(n) * cap);
    };
    double lo = 0.0, hi = 1.0;
    while (mean_cf(hi) < config.capacity_factor && hi < 1e6) hi *= 2.0;
    for (int it = 0; it < 100; ++it) {
      const double mid = 0.5 * (lo + hi);
      (mean_cf(mid) < config.capacity_factor ? lo : hi) = mid;
    }
    const double scale = 0.5 * (lo + hi);
    for (std::size_t t = 0; t < n; ++t) g_act[t] = std::min(cap, scale * ghi[t] / 1000.0 * cap);
  }

  // Forecasts: shared error component across horizons, heteroscedastic in
  // the clear-sky potential so night forecasts are exactly zero.
  std::vector<double> f1(n), f5(n), fda(n);
  {
    auto rng = component_stream(seed, 2);
    double mean_cs = 0.0;
    for (double c : clear_sky) mean_cs += c;
    mean_cs /= static_cast<double>(n);
    const double rho = config.horizon_correlation;
    const double phi = config.error_persistence;
    Ar1 common(phi, 1.0), idio1(phi, 1.0), idio5(phi, 1.0), idio_da(phi, 1.0);
    const double s1 = horizon_sigma(config.sigma_id, config.sigma_da, 1.0);
    const double s5 = horizon_sigma(config.sigma_id, config.sigma_da, 5.0);
    const double sda = config.sigma_da;
    for (std::size_t t = 0; t < n; ++t) {
      const double c = common.next(normal(rng));
      const double i1 = idio1.next(normal(rng));
      const double i5 = idio5.next(normal(rng));
      const double ida = idio_da.next(normal(rng));
      if (clear_sky[t] <= 0.0) {
        f1[t] = f5[t] = fda[t] = 0.0;
        continue;
      }
      const double w = std::sqrt(clear_sky[t] / mean_cs);
      auto make = [&](double sigma, double idio) {
        const double xi = std::sqrt(rho) * c + std::sqrt(1.0 - rho) * idio;
        return std::clamp(g_act[t] + sigma * cap * w * xi, 0.0, cap);
      };
      f1[t] = make(s1, i1);
      f5[t] = make(s5, i5);
      fda[t] = make(sda, ida);
    }
  }

  // Day-ahead prices
  std::vector<double> p_da(n);
  {
    auto rng = component_stream(seed, 3);
    const auto& pm = config.price;
    Ar1 resid(pm.ar_coef, pm.volatility);
    for (std::size_t t = 0; t < n; ++t) {
      const HourIndex h = start + static_cast<HourIndex>(t);
      const double hod = hour_of_day(h);
      const double season = std::cos(2.0 * kPi * (day_of_year(h) - 15.0) / 365.0);
      const double peaks = std::exp(-0.5 * std::pow((hod - 8.0) / 2.0, 2.0)) +
                           std::exp(-0.5 * std::pow((hod - 19.0) / 2.5, 2.0)) - 0.4;
      p_da[t] = pm.mean + pm.seasonal_amplitude * season + pm.diurnal_amplitude * peaks -
                pm.solar_depression * clear_sky[t] / 1000.0 + resid.next(normal(rng));
    }
  }

  Dataset data;
  data.market.resize(n);
  data.pv.resize(n);
  {
    auto rng_imb = component_stream(seed, 4);
    auto rng_quotes = component_stream(seed, 5);
    const auto& im = config.imbalance;
    Ar1 signal(im.persistence, 1.0);
    for (std::size_t t = 0; t < n; ++t) {
      const HourIndex h = start + static_cast<HourIndex>(t);
      // Positive signal: system long (surplus), priced by down-regulation.
      const double plant_error = (g_act[t] - fda[t]) / (config.sigma_da * cap);
      const double s = signal.next(normal(rng_imb)) + im.coupling * plant_error;
      RegulationState reg = RegulationState::balanced;
      double shift = 0.0;
      if (s > im.threshold) {
        reg = RegulationState::down;
        shift = -im.down_discount;
      } else if (s < -im.threshold) {
        reg = RegulationState::up;
        shift = im.up_premium;
      }
      const double imb_noise = normal(rng_imb);

      QuoteNoise qn;
      qn.spread = normal(rng_quotes);
      qn.mid = normal(rng_quotes);
      qn.bid_depth = normal(rng_quotes);
      qn.ask_depth = normal(rng_quotes);
      const Quotes q = derive_quotes(p_da[t], config.spread, qn);

      auto& m = data.market[t];
      m.timestamp = h;
      m.p_da = p_da[t];
      m.p_id_bid = q.bid;
      m.p_id_ask = q.ask;
      m.p_im = p_da[t] + shift + im.noise * imb_noise;
      m.bid_depth = q.bid_depth;
      m.ask_depth = q.ask_depth;
      m.regulation_state = reg;

      auto& p = data.pv[t];
      p.timestamp = h;
      p.g_act = g_act[t];
      p.g_da = fda[t];
      p.forecast_1h = f1[t];
      p.forecast_5h = f5[t];
      p.forecast_da = fda[t];
      p.ghi = ghi[t];
      p.cloud_cover = cloud[t];
      p.temp_2m = temp[t];
    }
  }
  return data;
}

void validate_dataset(const Dataset& data, double capacity) {
  if (data.market.size() != data.pv.size()) {
    throw DataError(fmt::format("market has {} rows but pv has {}", data.market.size(), data.pv.size()));
  }
  for (std::size_t i = 0; i < data.market.size(); ++i) {
    const auto row = i + 1;
    const auto& m = data.market[i];
    const auto& p = data.pv[i];
    if (m.timestamp != p.timestamp) throw DataError("market and pv timestamps differ", row);
    if (i > 0) {
      const auto prev = data.market[i - 1].timestamp;
      if (m.timestamp <= prev) throw DataError("timestamps not strictly increasing", row);
      if (m.timestamp != prev + 1) throw DataError("non-contiguous timestamps", row);
    }
    for (double v : {m.p_da, m.p_id_bid, m.p_id_ask, m.p_im, m.bid_depth, m.ask_depth}) {
      if (!std::isfinite(v)) throw DataError("non-finite market field", row);
    }
    for (double v : {p.g_act, p.g_da, p.forecast_1h, p.forecast_5h, p.forecast_da, p.ghi,
                     p.cloud_cover, p.temp_2m}) {
      if (!std::isfinite(v)) throw DataError("non-finite pv field", row);
    }
    if (m.p_id_ask < m.p_id_bid) throw DataError("p_id_ask < p_id_bid", row);
    if (m.bid_depth < 0.0 || m.ask_depth < 0.0) throw DataError("negative depth", row);
    if (p.g_act < 0.0) throw DataError("negative g_act", row);
    if (p.ghi <= 0.0 && p.g_act != 0.0) throw DataError("g_act must be 0 when ghi is 0", row);
    if (p.cloud_cover < 0.0 || p.cloud_cover > 1.0) throw DataError("cloud_cover outside [0,1]", row);
    if (capacity > 0.0) {
      for (double v : {p.g_act, p.forecast_1h, p.forecast_5h, p.forecast_da}) {
        if (v < 0.0 || v > capacity) throw DataError("generation outside [0, capacity]", row);
      }
    }
  }
}

DatasetSplit split_chronological(const Dataset& data, HourIndex boundary) {
  if (data.size() == 0) throw DomainError("cannot split an empty dataset");
  const HourIndex first = data.market.front().timestamp;
  const HourIndex last = data.market.back().timestamp;
  if (boundary <= first || boundary > last) {
    throw DomainError(fmt::format("split boundary {} outside ({}, {}]", format_iso_hour(boundary),
                                  format_iso_hour(first), format_iso_hour(last)));
  }
  auto it = std::lower_bound(data.market.begin(), data.market.end(), boundary,
                             [](const MarketRecord& m, HourIndex b) { return m.timestamp < b; });
  const auto cut = static_cast<std::size_t>(it - data.market.begin());
  DatasetSplit out;
  out.boundary = boundary;
  out.train.market.assign(data.market.begin(), data.market.begin() + cut);
  out.train.pv.assign(data.pv.begin(), data.pv.begin() + cut);
  out.eval.market.assign(data.market.begin() + cut, data.market.end());
  out.eval.pv.assign(data.pv.begin() + cut, data.pv.end());
  return out;
}

HourIndex second_year_start(const Dataset& data) {
  const std::string iso = format_iso_hour(data.first_hour());
  const int year = std::stoi(iso.substr(0, 4));
  return hour_index_from_ymd(year + 1, 1, 1, 0);
}

}  // namespace pvtrade
