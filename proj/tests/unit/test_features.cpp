#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "pvtrade/calendar.hpp"
#include "pvtrade/errors.hpp"
#include "pvtrade/features.hpp"
#include "test_support.hpp"

namespace pvtrade {
namespace {

using testing::seed17;

// Independent two-pass population std, written out longhand.
double oracle_std(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

TEST(Features, RegistryIsStable) {
  const auto& reg = feature_registry();
  EXPECT_EQ(reg.size(), kFeatureDim);
  EXPECT_EQ(reg.back().name, "intercept");
  EXPECT_EQ(reg.back().domain, FeatureDomain::intercept);
  std::set<std::string_view> names;
  for (std::size_t i = 0; i < reg.size(); ++i) {
    names.insert(reg[i].name);
    EXPECT_EQ(feature_index(reg[i].name), i);
  }
  EXPECT_EQ(names.size(), kFeatureDim);
  for (const char* n : {"hour_sin", "hour_cos", "doy_sin", "doy_cos", "forecast", "forecast_delta", "forecast_sigma",
                        "da_price", "id_bid", "id_ask", "spread", "imbalance_price", "ghi", "cloud_cover", "temp_2m",
                        "price_vol", "bid_depth", "ask_depth", "depth_total"}) {
    EXPECT_NO_THROW(feature_index(n)) << n;
  }
  EXPECT_THROW(feature_index("moon_phase"), InputError);
}

TEST(Features, NoonOnDay172) {
  auto d = testing::flat_dataset(24 * 200);
  const HourIndex noon = hour_index_from_ymd(2023, 6, 21, 12);
  ASSERT_EQ(day_of_year(noon), 172);
  const auto t = static_cast<std::size_t>(noon - d.first_hour());
  const auto x = build_features(d, t);
  EXPECT_NEAR(x[kHourSin], 0.0, 1e-12);
  EXPECT_NEAR(x[kHourCos], -1.0, 1e-12);
  EXPECT_EQ(x[kIntercept], 1.0);
}

TEST(Features, ConstantForecastHasNoDeltaOrSigma) {
  const auto d = testing::flat_dataset(72, 1.5);
  for (std::size_t t = kFeatureWarmup; t < d.size(); ++t) {
    const auto x = build_features(d, t);
    EXPECT_EQ(x[kForecastDelta], 0.0);
    EXPECT_EQ(x[kForecastSigma], 0.0);
    EXPECT_DOUBLE_EQ(x[kForecastImbalance], 1.5);
    EXPECT_EQ(x[kPriceVol], 0.0);
  }
}

TEST(Features, InsufficientHistoryIsWindowError) {
  const auto d = testing::flat_dataset(48);
  EXPECT_THROW(build_features(d, 0), WindowError);
  EXPECT_THROW(build_features(d, kFeatureWarmup - 1), WindowError);
  EXPECT_NO_THROW(build_features(d, kFeatureWarmup));
  EXPECT_THROW(build_features(d, 48), WindowError);
}

TEST(Features, Seed17Hour100MatchesHandComputedWindow) {
  const auto& d = seed17();
  const std::size_t t = 100;
  const auto x = build_features(d, t);

  std::vector<double> err, pda;
  for (std::size_t k = t - 24; k < t; ++k) {
    err.push_back(d.pv[k].forecast_1h - d.pv[k].g_act);
    pda.push_back(d.market[k].p_da);
  }
  EXPECT_NEAR(x[kForecastSigma], oracle_std(err), 1e-12);
  EXPECT_NEAR(x[kPriceVol], oracle_std(pda), 1e-12);
  EXPECT_EQ(x[kImbalancePrice], d.market[t - 1].p_im);
  EXPECT_EQ(x[kGhi], d.pv[t - 1].ghi);
  EXPECT_EQ(x[kDaPrice], d.market[t].p_da);
  EXPECT_EQ(x[kForecast], d.pv[t].forecast_5h);
  EXPECT_DOUBLE_EQ(x[kSpread], d.market[t].p_id_ask - d.market[t].p_id_bid);
  EXPECT_DOUBLE_EQ(x[kDepthTotal], d.market[t].bid_depth + d.market[t].ask_depth);

  // Frozen snapshot after the checks above agreed.
  const FeatureVector golden = {0.8660254037844386,   0.50000000000000011, 0.085964798737446474, 0.99629817493460782,
                                0,                    0,                   0,                    0.15891392315029787,
                                60.562993566647521,   58.222867808633467,  62.049461839892984,   3.8265940312595177,
                                62.698257071128808,   1,                   0,                    0,
                                0.663335677209687,    -5.3797097127695821, 5.3648835175047749,   15.191492357805132,
                                29.416512403660057,   44.608004761465189,  1};
  for (std::size_t i = 0; i < kFeatureDim; ++i) {
    EXPECT_NEAR(x[i], golden[i], 1e-9 * std::max(1.0, std::abs(golden[i]))) << feature_registry()[i].name;
  }
}

TEST(Features, HorizonSwapsForecastSource) {
  const auto& d = seed17();
  const std::size_t t = 4000;
  EXPECT_EQ(build_features(d, t, {ForecastHorizon::h1})[kForecast], d.pv[t].forecast_1h);
  EXPECT_EQ(build_features(d, t, {ForecastHorizon::h5})[kForecast], d.pv[t].forecast_5h);
  EXPECT_EQ(build_features(d, t, {ForecastHorizon::day_ahead})[kForecast], d.pv[t].forecast_da);
  EXPECT_EQ(horizon_from_string("day_ahead"), ForecastHorizon::day_ahead);
  EXPECT_THROW(horizon_from_string("2h"), InputError);
}

TEST(Features, NoLookaheadUnderRandomPerturbation) {
  // Realized quantities of the delivery hour and everything after it are
  // unknown at the cutoff; perturbing them must leave the vector unchanged.
  const auto& base = seed17();
  testing::Gen g(101);
  for (int trial = 0; trial < 100; ++trial) {
    const auto t = static_cast<std::size_t>(g.integer(24, 17000));
    Dataset d;
    const std::size_t hi = std::min(base.size(), t + 60);
    d.market.assign(base.market.begin(), base.market.begin() + static_cast<std::ptrdiff_t>(hi));
    d.pv.assign(base.pv.begin(), base.pv.begin() + static_cast<std::ptrdiff_t>(hi));
    const auto before = build_features(d, t);

    d.pv[t].g_act += g.uniform(-3, 3);
    d.pv[t].ghi += g.uniform(0, 200);
    d.pv[t].cloud_cover = g.uniform(0, 1);
    d.pv[t].temp_2m += g.normal() * 5;
    d.market[t].p_im += g.normal() * 50;
    d.market[t].regulation_state = static_cast<RegulationState>(g.integer(0, 2));
    for (std::size_t k = t + 1; k < d.size(); ++k) {
      auto& m = d.market[k];
      auto& p = d.pv[k];
      m.p_da += g.normal() * 20;
      m.p_id_bid += g.normal() * 5;
      m.p_id_ask = m.p_id_bid + g.uniform(0, 8);
      m.p_im += g.normal() * 50;
      m.bid_depth = g.uniform(0, 40);
      m.ask_depth = g.uniform(0, 40);
      p.g_act = g.uniform(0, 10);
      p.forecast_1h = g.uniform(0, 10);
      p.forecast_5h = g.uniform(0, 10);
      p.forecast_da = g.uniform(0, 10);
      p.g_da = g.uniform(0, 10);
      p.ghi = g.uniform(0, 900);
    }
    const auto after = build_features(d, t);
    for (std::size_t i = 0; i < kFeatureDim; ++i) {
      ASSERT_EQ(before[i], after[i]) << "trial " << trial << " t " << t << " " << feature_registry()[i].name;
    }
  }
}

TEST(Normalizer, TwoPointColumn) {
  FeatureMatrix m;
  FeatureVector a{}, b{};
  a[kForecast] = 1.0;
  b[kForecast] = 3.0;
  a[kIntercept] = b[kIntercept] = 1.0;
  m.push_back(a);
  m.push_back(b);
  const auto n = fit_normalizer(m);
  EXPECT_DOUBLE_EQ(n.mean[kForecast], 2.0);
  EXPECT_DOUBLE_EQ(n.std[kForecast], 1.0);
  EXPECT_DOUBLE_EQ(n.apply(a)[kForecast], -1.0);
  EXPECT_DOUBLE_EQ(n.apply(b)[kForecast], 1.0);
  // Constant columns are floored to unit std and map to zero.
  EXPECT_EQ(n.std[kGhi], 1.0);
  EXPECT_EQ(n.apply(a)[kGhi], 0.0);
  EXPECT_EQ(n.apply(a)[kIntercept], 1.0);
}

TEST(Normalizer, NeedsTwoRows) {
  FeatureMatrix m;
  EXPECT_THROW(fit_normalizer(m), InputError);
  m.push_back(FeatureVector{});
  EXPECT_THROW(fit_normalizer(m), InputError);
}

TEST(Normalizer, TrainMatrixStandardizesAndMatchesGolden) {
  const auto m = build_feature_matrix(seed17());
  const auto n = fit_normalizer(m, kFeatureWarmup, testing::kSeed17Boundary);
  const double count = static_cast<double>(testing::kSeed17Boundary - kFeatureWarmup);
  for (std::size_t i = 0; i + 1 < kFeatureDim; ++i) {
    double s = 0.0, ss = 0.0;
    for (std::size_t r = kFeatureWarmup; r < testing::kSeed17Boundary; ++r) {
      FeatureVector x;
      std::copy(m.row(r).begin(), m.row(r).end(), x.begin());
      const double z = n.apply(x)[i];
      s += z;
      ss += z * z;
    }
    const double mean = s / count;
    const double sd = std::sqrt(ss / count - mean * mean);
    EXPECT_LE(std::abs(mean), 1e-9) << feature_registry()[i].name;
    if (n.std[i] != 1.0) {
      EXPECT_GE(sd, 0.999) << feature_registry()[i].name;
      EXPECT_LE(sd, 1.001) << feature_registry()[i].name;
    }
  }
  struct G {
    std::size_t i;
    double mean, std;
  };
  for (const G g : {G{kHourSin, -7.3957679622322558e-17, 0.70710678118654757},
                    G{kForecast, 1.2659134886785868, 2.0326260682951487},
                    G{kForecastDelta, -0.011022240895219193, 0.65962210444084912},
                    G{kDaPrice, 58.239657679541175, 13.584051358494406},
                    G{kImbalancePrice, 56.005958326101229, 16.776782803515605},
                    G{kPriceVol, 6.5262284866158851, 1.7277239839943475}}) {
    EXPECT_NEAR(n.mean[g.i], g.mean, 1e-9) << g.i;
    EXPECT_NEAR(n.std[g.i], g.std, 1e-9) << g.i;
  }
}

TEST(Normalizer, InterceptIsNeverAltered) {
  testing::Gen g(5);
  Normalizer n;
  for (int trial = 0; trial < 200; ++trial) {
    for (std::size_t i = 0; i + 1 < kFeatureDim; ++i) {
      n.mean[i] = g.normal() * 10;
      n.std[i] = g.uniform(0.1, 10);
    }
    FeatureVector x;
    for (auto& v : x) v = g.normal() * 100;
    x[kIntercept] = 1.0;
    ASSERT_EQ(n.apply(x)[kIntercept], 1.0);
  }
}

TEST(Ablation, ZeroesOnlyTheNamedGroups) {
  FeatureVector x;
  x.fill(2.0);
  const std::array<AblationGroup, 1> liq{AblationGroup::liquidity};
  auto y = x;
  apply_ablation(y, liq);
  for (std::size_t i = 0; i < kFeatureDim; ++i) {
    const bool zeroed = i == kBidDepth || i == kAskDepth || i == kDepthTotal;
    EXPECT_EQ(y[i], zeroed ? 0.0 : 2.0) << i;
  }
  const std::array<AblationGroup, 2> mw{AblationGroup::market, AblationGroup::weather};
  y = x;
  apply_ablation(y, mw);
  for (std::size_t i = 0; i < kFeatureDim; ++i) {
    const auto dom = feature_registry()[i].domain;
    const bool zeroed = dom == FeatureDomain::market || dom == FeatureDomain::weather;
    EXPECT_EQ(y[i], zeroed ? 0.0 : 2.0) << i;
  }
  EXPECT_EQ(y[kIntercept], 2.0);
  EXPECT_THROW(ablation_from_string("sentiment"), InputError);
}

}  // namespace
}  // namespace pvtrade
