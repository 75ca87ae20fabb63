#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pvtrade/market_data.hpp"

namespace pvtrade {

enum class FeatureDomain { temporal, forecast, market, weather, volatility, intercept };

std::string to_string(FeatureDomain d);

struct FeatureInfo {
  std::string_view name;
  FeatureDomain domain;
};

/// Fixed feature registry. Order is part of the checkpoint format.
enum FeatureIndex : std::size_t {
  kHourSin,
  kHourCos,
  kDoySin,
  kDoyCos,
  kForecast,
  kForecastDelta,
  kForecastImbalance,
  kForecastSigma,
  kDaPrice,
  kIdBid,
  kIdAsk,
  kSpread,
  kImbalancePrice,
  kRegUp,
  kRegDown,
  kGhi,
  kCloudCover,
  kTemp2m,
  kPriceVol,
  kBidDepth,
  kAskDepth,
  kDepthTotal,
  kIntercept,
  kFeatureCount
};

inline constexpr std::size_t kFeatureDim = kFeatureCount;

const std::array<FeatureInfo, kFeatureDim>& feature_registry();

/// Index of a feature by registry name; throws InputError when unknown.
std::size_t feature_index(std::string_view name);

/// Hours of history needed before a delivery hour can be featurized.
inline constexpr std::size_t kFeatureWarmup = 24;

enum class ForecastHorizon { h1, h5, day_ahead };

std::string to_string(ForecastHorizon h);
ForecastHorizon horizon_from_string(const std::string& s);

struct FeatureOptions {
  ForecastHorizon horizon = ForecastHorizon::h5;
};

using FeatureVector = std::array<double, kFeatureDim>;

/// Forecast for delivery row `t` at the configured horizon.
double forecast_at(const PvRecord& pv, ForecastHorizon h);

/// Raw (unnormalized) features for delivery hour `t` of `data`.
///
/// Uses only information available at the cutoff one hour before delivery:
/// the ex-ante fields of row `t` (day-ahead price, the intraday book for the
/// product, forecasts issued for `t`, the day-ahead commitment) and every field
/// of rows strictly before `t`. Throws WindowError when `t < kFeatureWarmup`.
FeatureVector build_features(const Dataset& data, std::size_t t, const FeatureOptions& options = {});

/// Row-major matrix of feature vectors, one per featurized hour.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  explicit FeatureMatrix(std::size_t rows) : data_(rows * kFeatureDim, 0.0) {}

  std::size_t rows() const noexcept { return data_.size() / kFeatureDim; }
  std::span<double, kFeatureDim> row(std::size_t i) {
    return std::span<double, kFeatureDim>(data_.data() + i * kFeatureDim, kFeatureDim);
  }
  std::span<const double, kFeatureDim> row(std::size_t i) const {
    return std::span<const double, kFeatureDim>(data_.data() + i * kFeatureDim, kFeatureDim);
  }
  void push_back(const FeatureVector& v) { data_.insert(data_.end(), v.begin(), v.end()); }

 private:
  std::vector<double> data_;
};

/// Features for every row of `data`. Rows before the warm-up are left zero
/// except for the intercept; callers must not consume them.
FeatureMatrix build_feature_matrix(const Dataset& data, const FeatureOptions& options = {});

/// Per-feature standardization fitted on the training split. The intercept is
/// never scaled.
struct Normalizer {
  std::array<double, kFeatureDim - 1> mean{};
  std::array<double, kFeatureDim - 1> std{};

  FeatureVector apply(const FeatureVector& x) const;
  void apply_inplace(std::span<double, kFeatureDim> x) const;
};

inline constexpr double kStdFloor = 1e-8;

/// Population mean/std over rows [first, last). Columns with std below
/// kStdFloor get std = 1. Throws InputError with fewer than two rows.
Normalizer fit_normalizer(const FeatureMatrix& m, std::size_t first = 0,
                          std::size_t last = static_cast<std::size_t>(-1));

/// Feature groups that can be removed at deployment or training time.
enum class AblationGroup { market, weather, liquidity };

std::string to_string(AblationGroup g);
AblationGroup ablation_from_string(const std::string& s);

/// True when feature `i` belongs to `g`.
bool in_group(std::size_t i, AblationGroup g);

/// Zeroes standardized values of every ablated feature.
void apply_ablation(std::span<double, kFeatureDim> x, std::span<const AblationGroup> groups);

}  // namespace pvtrade
