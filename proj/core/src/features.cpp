#include "pvtrade/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "pvtrade/errors.hpp"

namespace pvtrade {

namespace {

constexpr std::array<FeatureInfo, kFeatureDim> kRegistry{{
    {"hour_sin", FeatureDomain::temporal},
    {"hour_cos", FeatureDomain::temporal},
    {"doy_sin", FeatureDomain::temporal},
    {"doy_cos", FeatureDomain::temporal},
    {"forecast", FeatureDomain::forecast},
    {"forecast_delta", FeatureDomain::forecast},
    {"forecast_imbalance", FeatureDomain::forecast},
    {"forecast_sigma", FeatureDomain::forecast},
    {"da_price", FeatureDomain::market},
    {"id_bid", FeatureDomain::market},
    {"id_ask", FeatureDomain::market},
    {"spread", FeatureDomain::market},
    {"imbalance_price", FeatureDomain::market},
    {"reg_up", FeatureDomain::market},
    {"reg_down", FeatureDomain::market},
    {"ghi", FeatureDomain::weather},
    {"cloud_cover", FeatureDomain::weather},
    {"temp_2m", FeatureDomain::weather},
    {"price_vol", FeatureDomain::volatility},
    {"bid_depth", FeatureDomain::volatility},
    {"ask_depth", FeatureDomain::volatility},
    {"depth_total", FeatureDomain::volatility},
    {"intercept", FeatureDomain::intercept},
}};

/// Population standard deviation of f(k) over k in [first, last).
template <typename F>
double rolling_std(std::size_t first, std::size_t last, F f) {
  const double n = static_cast<double>(last - first);
  double mean = 0.0;
  for (std::size_t k = first; k < last; ++k) mean += f(k);
  mean /= n;
  double ss = 0.0;
  for (std::size_t k = first; k < last; ++k) {
    const double d = f(k) - mean;
    ss += d * d;
  }
  return std::sqrt(ss / n);
}

}  // namespace

std::string to_string(FeatureDomain d) {
  switch (d) {
    case FeatureDomain::temporal: return "temporal";
    case FeatureDomain::forecast: return "forecast";
    case FeatureDomain::market: return "market";
    case FeatureDomain::weather: return "weather";
    case FeatureDomain::volatility: return "volatility";
    case FeatureDomain::intercept: return "intercept";
  }
  return "intercept";
}

const std::array<FeatureInfo, kFeatureDim>& feature_registry() { return kRegistry; }

std::size_t feature_index(std::string_view name) {
  for (std::size_t i = 0; i < kFeatureDim; ++i) {
    if (kRegistry[i].name == name) return i;
  }
  throw InputError(fmt::format("unknown feature '{}'", name));
}

std::string to_string(ForecastHorizon h) {
  switch (h) {
    case ForecastHorizon::h1: return "1h";
    case ForecastHorizon::h5: return "5h";
    case ForecastHorizon::day_ahead: return "day_ahead";
  }
  return "5h";
}

ForecastHorizon horizon_from_string(const std::string& s) {
  if (s == "1h") return ForecastHorizon::h1;
  if (s == "5h") return ForecastHorizon::h5;
  if (s == "day_ahead" || s == "da") return ForecastHorizon::day_ahead;
  throw InputError("unknown forecast horizon '" + s + "'");
}

double forecast_at(const PvRecord& pv, ForecastHorizon h) {
  switch (h) {
    case ForecastHorizon::h1: return pv.forecast_1h;
    case ForecastHorizon::h5: return pv.forecast_5h;
    case ForecastHorizon::day_ahead: return pv.forecast_da;
  }
  return pv.forecast_5h;
}

FeatureVector build_features(const Dataset& data, std::size_t t, const FeatureOptions& options) {
  if (t < kFeatureWarmup) {
    throw WindowError(fmt::format("hour {} has {} h of history, need {}", t, t, kFeatureWarmup));
  }
  if (t >= data.size()) throw WindowError(fmt::format("hour {} beyond dataset end", t));

  const auto& m = data.market[t];
  const auto& p = data.pv[t];
  const auto& m_prev = data.market[t - 1];
  const auto& p_prev = data.pv[t - 1];
  const std::size_t w0 = t - kFeatureWarmup;

  constexpr double two_pi = 2.0 * std::numbers::pi;
  FeatureVector x{};
  const double hod = hour_of_day(m.timestamp);
  const double doy = day_of_year(m.timestamp);
  const double ydays = days_in_year_of(m.timestamp);
  x[kHourSin] = std::sin(two_pi * hod / 24.0);
  x[kHourCos] = std::cos(two_pi * hod / 24.0);
  x[kDoySin] = std::sin(two_pi * doy / ydays);
  x[kDoyCos] = std::cos(two_pi * doy / ydays);

  const double fc = forecast_at(p, options.horizon);
  x[kForecast] = fc;
  x[kForecastDelta] = p.forecast_1h - p.forecast_5h;  // latest revision for the hour
  x[kForecastImbalance] = fc - p.g_da;
  x[kForecastSigma] =
      rolling_std(w0, t, [&](std::size_t k) { return data.pv[k].forecast_1h - data.pv[k].g_act; });

  x[kDaPrice] = m.p_da;
  x[kIdBid] = m.p_id_bid;
  x[kIdAsk] = m.p_id_ask;
  x[kSpread] = m.p_id_ask - m.p_id_bid;
  x[kImbalancePrice] = m_prev.p_im;
  x[kRegUp] = m_prev.regulation_state == RegulationState::up ? 1.0 : 0.0;
  x[kRegDown] = m_prev.regulation_state == RegulationState::down ? 1.0 : 0.0;

  x[kGhi] = p_prev.ghi;
  x[kCloudCover] = p_prev.cloud_cover;
  x[kTemp2m] = p_prev.temp_2m;

  x[kPriceVol] = rolling_std(w0, t, [&](std::size_t k) { return data.market[k].p_da; });
  x[kBidDepth] = m.bid_depth;
  x[kAskDepth] = m.ask_depth;
  x[kDepthTotal] = m.bid_depth + m.ask_depth;

  x[kIntercept] = 1.0;
  for (std::size_t i = 0; i + 1 < kFeatureDim; ++i) {
    if (!std::isfinite(x[i])) {
      throw DataError(fmt::format("non-finite feature '{}' at hour {}", kRegistry[i].name, t));
    }
  }
  return x;
}

FeatureMatrix build_feature_matrix(const Dataset& data, const FeatureOptions& options) {
  FeatureMatrix out(data.size());
  for (std::size_t t = 0; t < data.size(); ++t) {
    if (t < kFeatureWarmup) {
      out.row(t)[kIntercept] = 1.0;
      continue;
    }
    const auto x = build_features(data, t, options);
    std::copy(x.begin(), x.end(), out.row(t).begin());
  }
  return out;
}

FeatureVector Normalizer::apply(const FeatureVector& x) const {
  FeatureVector y = x;
  apply_inplace(y);
  return y;
}

void Normalizer::apply_inplace(std::span<double, kFeatureDim> x) const {
  for (std::size_t i = 0; i + 1 < kFeatureDim; ++i) x[i] = (x[i] - mean[i]) / std[i];
}

Normalizer fit_normalizer(const FeatureMatrix& m, std::size_t first, std::size_t last) {
  last = std::min(last, m.rows());
  if (first >= last || last - first < 2) {
    throw InputError("fit_normalizer needs at least two training rows");
  }
  Normalizer n;
  const double count = static_cast<double>(last - first);
  for (std::size_t i = 0; i + 1 < kFeatureDim; ++i) {
    double mean = 0.0;
    for (std::size_t r = first; r < last; ++r) mean += m.row(r)[i];
    mean /= count;
    double ss = 0.0;
    for (std::size_t r = first; r < last; ++r) {
      const double d = m.row(r)[i] - mean;
      ss += d * d;
    }
    const double sd = std::sqrt(ss / count);
    n.mean[i] = mean;
    n.std[i] = sd < kStdFloor ? 1.0 : sd;
  }
  return n;
}

std::string to_string(AblationGroup g) {
  switch (g) {
    case AblationGroup::market: return "market";
    case AblationGroup::weather: return "weather";
    case AblationGroup::liquidity: return "liquidity";
  }
  return "market";
}

AblationGroup ablation_from_string(const std::string& s) {
  if (s == "market") return AblationGroup::market;
  if (s == "weather") return AblationGroup::weather;
  if (s == "liquidity") return AblationGroup::liquidity;
  throw InputError("unknown ablation group '" + s + "'");
}

bool in_group(std::size_t i, AblationGroup g) {
  switch (g) {
    case AblationGroup::market: return kRegistry[i].domain == FeatureDomain::market;
    case AblationGroup::weather: return kRegistry[i].domain == FeatureDomain::weather;
    case AblationGroup::liquidity: return i == kBidDepth || i == kAskDepth || i == kDepthTotal;
  }
  return false;
}

void apply_ablation(std::span<double, kFeatureDim> x, std::span<const AblationGroup> groups) {
  for (auto g : groups) {
    for (std::size_t i = 0; i + 1 < kFeatureDim; ++i) {
      if (in_group(i, g)) x[i] = 0.0;
    }
  }
}

}  // namespace pvtrade
