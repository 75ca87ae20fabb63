#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "pvtrade/errors.hpp"
#include "pvtrade/mdp_env.hpp"
#include "pvtrade/training.hpp"
#include "test_support.hpp"

namespace pvtrade {
namespace {

Environment make_env(const Dataset& d, EnvConfig cfg = {}) {
  auto data = std::make_shared<const Dataset>(d);
  auto feats = std::make_shared<const FeatureMatrix>(build_feature_matrix(d));
  return Environment(data, feats, cfg);
}

EnvConfig plain_config() {
  EnvConfig c;
  c.lambda_inv = 0.0;
  c.route_through_executor = false;
  return c;
}

TEST(Midprice, FixedPointAndHalfReversion) {
  MidpriceParams p;
  p.kappa_rev = 0.3;
  p.nu = 0.0;
  EXPECT_EQ(midprice_step(50, 50, p, 1.7, -0.4), 50.0);
  p.kappa_rev = 0.5;
  EXPECT_DOUBLE_EQ(midprice_step(60, 50, p, 0.0, 0.0), 55.0);
}

TEST(Midprice, StationaryStdMatchesAnalytic) {
  MidpriceParams p;
  p.kappa_rev = 0.3;
  p.nu = 1.0;
  p.jump_std = 0.5;
  // AR(1) with coefficient 1-k and innovation variance nu^2 + jump^2.
  const double phi = 1.0 - p.kappa_rev;
  const double analytic = std::sqrt((p.nu * p.nu + p.jump_std * p.jump_std) / (1.0 - phi * phi));
  EXPECT_NEAR(std::sqrt(midprice_stationary_variance(p)), analytic, 1e-12);

  testing::Gen g(31);
  double m = 50.0, s = 0.0, ss = 0.0;
  for (int i = 0; i < 1000; ++i) m = midprice_step(m, 50.0, p, g.normal(), g.normal());
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    m = midprice_step(m, 50.0, p, g.normal(), g.normal());
    s += m;
    ss += m * m;
  }
  const double mean = s / n;
  const double sd = std::sqrt(ss / n - mean * mean);
  EXPECT_NEAR(sd / analytic, 1.0, 0.05);
}

TEST(DiscountHorizon, ValuesAndDomain) {
  EXPECT_NEAR(discount_horizon(0.98), 50.0, 1e-9);
  EXPECT_DOUBLE_EQ(discount_horizon(0.5), 2.0);
  EXPECT_NEAR(discount_horizon(0.9), 10.0, 1e-12);
  EXPECT_THROW(discount_horizon(1.0), DomainError);
  EXPECT_THROW(discount_horizon(0.0), DomainError);
  EXPECT_THROW(discount_horizon(-0.5), DomainError);
}

TEST(Env, ResetInitialPosition) {
  auto env = make_env(testing::flat_dataset(72));
  const auto& s = env.reset(24);
  EXPECT_EQ(s.x, 0.0);
  EXPECT_EQ(s.tau, kRoundsPerEpisode);
  EXPECT_EQ(s.m, 50.0);

  auto env2 = make_env(testing::flat_dataset(72, 2.0));
  EXPECT_DOUBLE_EQ(env2.reset(24).x, 2.0);
}

TEST(Env, ResetNeedsHistoryAndFullDay) {
  auto env = make_env(testing::flat_dataset(60));
  EXPECT_THROW(env.reset(10), WindowError);
  EXPECT_THROW(env.reset(40), WindowError);
  EXPECT_NO_THROW(env.reset(36));
}

TEST(Env, NullActionOnBalancedBook) {
  auto env = make_env(testing::flat_dataset(72), EnvConfig{});
  env.reset(24);
  const auto o = env.step({0.0, 0.0}, StepDraws{});
  EXPECT_EQ(o.reward, 0.0);
  EXPECT_EQ(o.executed, 0.0);
  EXPECT_EQ(o.next_state.x, 0.0);
  EXPECT_FALSE(o.traded);
}

TEST(Env, SaleMinusCost) {
  auto d = testing::flat_dataset(72, 1.0);
  for (auto& m : d.market) m.p_id_bid = 50.0;
  auto cfg = plain_config();
  cfg.exec.imp_alpha = 2.0;
  cfg.exec.imp_beta = 0.0;
  auto env = make_env(d, cfg);
  env.reset(24);
  const auto o = env.step({1.0, -1.0}, StepDraws{});
  EXPECT_EQ(o.executed, 1.0);
  EXPECT_EQ(o.price, 50.0);
  EXPECT_DOUBLE_EQ(o.cost, 2.0);
  EXPECT_EQ(o.settlement, 0.0);
  EXPECT_DOUBLE_EQ(o.reward, 48.0);
}

TEST(Env, ResidualSettlesAtImbalancePrice) {
  for (double x : {2.0, -2.0}) {
    auto d = testing::flat_dataset(72, x);
    for (auto& m : d.market) m.p_im = 40.0;
    auto env = make_env(d, plain_config());
    env.reset(24);
    StepOutcome o;
    while (!env.done()) o = env.step({0.0, 0.0}, StepDraws{});
    EXPECT_DOUBLE_EQ(o.settlement, 40.0 * x);
    EXPECT_DOUBLE_EQ(o.reward, 40.0 * x);
    EXPECT_TRUE(o.done);
    EXPECT_EQ(o.next_state.tau, 0);
  }
}

TEST(Env, StepAfterDoneIsLifecycleError) {
  auto env = make_env(testing::flat_dataset(72));
  EXPECT_THROW(env.step({}, {}), LifecycleError);
  env.reset(24);
  int steps = 0;
  while (!env.done()) {
    env.step({0.0, 0.0}, StepDraws{});
    ++steps;
  }
  EXPECT_EQ(steps, kRoundsPerEpisode);
  EXPECT_THROW(env.step({}, {}), LifecycleError);
}

// Random actions over seed-17 days, with both quote sources and routing modes.
template <typename F>
void random_episodes(std::uint64_t seed, int episodes, F&& on_step) {
  testing::Gen g(seed);
  auto inputs = prepare_inputs(testing::seed17(), {}, testing::kSeed17Boundary);
  for (int e = 0; e < episodes; ++e) {
    EnvConfig cfg;
    cfg.route_through_executor = g.coin();
    cfg.quote_source = g.coin() ? QuoteSource::dataset : QuoteSource::simulated;
    Environment env(inputs.data, inputs.features, cfg);
    const auto starts = env.episode_starts();
    env.reset(starts[static_cast<std::size_t>(g.integer(0, static_cast<int>(starts.size()) - 1))]);
    int tau = env.state().tau;
    while (!env.done()) {
      const MdpState before = env.state();
      const MdpAction a{g.normal() * 8, g.normal() * 4};
      StepDraws dr{g.uniform(0, 1), g.normal(), g.normal()};
      const auto o = env.step(a, dr);
      ASSERT_EQ(o.next_state.tau, tau - 1);
      tau = o.next_state.tau;
      on_step(env, before, o);
    }
  }
}

TEST(Env, InventoryConservation) {
  random_episodes(3, 60, [](const Environment&, const MdpState& s, const StepOutcome& o) {
    ASSERT_NEAR(o.next_state.x + o.executed + o.forecast_update, s.x, 1e-12 * std::max(1.0, std::abs(s.x)));
  });
}

TEST(Env, RewardIsBounded) {
  auto inputs = prepare_inputs(testing::seed17(), {}, testing::kSeed17Boundary);
  const double bound = Environment(inputs.data, inputs.features, EnvConfig{}).reward_bound();
  ASSERT_TRUE(std::isfinite(bound));
  random_episodes(4, 100, [&](const Environment& env, const MdpState&, const StepOutcome& o) {
    ASSERT_LE(std::abs(o.reward), env.reward_bound());
  });
  EXPECT_GT(bound, 0.0);
}

TEST(Env, ShapingIsNotACashFlow) {
  random_episodes(5, 40, [](const Environment& env, const MdpState& s, const StepOutcome& o) {
    ASSERT_DOUBLE_EQ(o.reward, o.cash + o.settlement + o.shaping);
    ASSERT_DOUBLE_EQ(o.shaping, -env.config().lambda_inv * s.p_im_last * (s.x - o.executed));
    // Settlement is the realized residual of this hour only.
    (void)s;
    ASSERT_DOUBLE_EQ(o.cash, o.executed * o.price - o.cost);
  });
}

TEST(Env, DeterministicUnderFixedDraws) {
  auto inputs = prepare_inputs(testing::seed17(), {}, testing::kSeed17Boundary);
  EnvConfig cfg;
  cfg.quote_source = QuoteSource::simulated;
  Environment a(inputs.data, inputs.features, cfg), b(inputs.data, inputs.features, cfg);
  const auto starts = a.episode_starts();
  for (std::size_t day : {3u, 100u, 300u}) {
    a.reset(starts[day]);
    b.reset(starts[day]);
    testing::Gen ga(day), gb(day);
    while (!a.done()) {
      const MdpAction act{ga.normal() * 3, ga.normal()};
      const MdpAction act_b{gb.normal() * 3, gb.normal()};
      const auto da = matched_draws(9, a.state().hour);
      const auto db = matched_draws(9, b.state().hour);
      const auto oa = a.step(act, da);
      const auto ob = b.step(act_b, db);
      ASSERT_EQ(oa.reward, ob.reward);
      ASSERT_EQ(oa.next_state.m, ob.next_state.m);
      ASSERT_EQ(oa.executed, ob.executed);
    }
  }
}

TEST(Env, MatchedDrawsAreStable) {
  const auto a = matched_draws(17, 123456);
  const auto b = matched_draws(17, 123456);
  EXPECT_EQ(a.fill_u, b.fill_u);
  EXPECT_EQ(a.mid_normal, b.mid_normal);
  EXPECT_NE(matched_draws(17, 123457).fill_u, a.fill_u);
  EXPECT_GE(a.fill_u, 0.0);
  EXPECT_LT(a.fill_u, 1.0);
}

TEST(Env, Seed17Day10Golden) {
  auto inputs = prepare_inputs(testing::seed17(), {}, testing::kSeed17Boundary);
  Environment env(inputs.data, inputs.features, EnvConfig{});
  const auto starts = env.episode_starts();
  ASSERT_EQ(starts[10], 264u);
  const auto& s = env.reset(starts[10]);
  EXPECT_EQ(s.hour, 464856);
  EXPECT_EQ(s.x, 0.0);
  EXPECT_EQ(s.g_hat, 0.0);
  EXPECT_NEAR(s.sigma, 0.2118111970875052, 1e-12);
  EXPECT_NEAR(s.p_da, 65.45437369373299, 1e-10);
  EXPECT_NEAR(s.m, 66.598326614192729, 1e-10);
  EXPECT_NEAR(s.book.bid, 65.04545551869802, 1e-10);
  EXPECT_NEAR(s.book.ask, 68.151197709687438, 1e-10);
  EXPECT_NEAR(s.book.bid_depth, 35.22872402735851, 1e-10);
  EXPECT_NEAR(s.book.ask_depth, 10.961152650742809, 1e-10);
  EXPECT_NEAR(s.p_im_last, 67.024708024544324, 1e-10);
  EXPECT_EQ(s.regulation_last, RegulationState::balanced);
  EXPECT_EQ(s.g_da, 0.0);
  EXPECT_EQ(s.tau, 24);
}

TEST(Env, CapsFollowForecastDeviation) {
  auto env = make_env(testing::flat_dataset(72, 3.0), plain_config());
  env.reset(24);
  const auto c = env.caps();
  EXPECT_DOUBLE_EQ(c.ask, 3.0);
  EXPECT_EQ(c.buy, 0.0);
  // Volumes beyond the caps are cut back.
  const auto o = env.step({5.0, -1.0}, StepDraws{});
  EXPECT_DOUBLE_EQ(o.executed, 3.0);
}

TEST(Env, TrajectoryCsvHasHeaderAndRows) {
  testing::TempDir dir("traj");
  auto env = make_env(testing::flat_dataset(72, 1.0));
  env.reset(24);
  Trajectory tr;
  while (!env.done()) {
    TrajectoryStep st;
    st.state = env.state();
    st.action = {0.5, 0.0};
    st.outcome = env.step(st.action, StepDraws{});
    tr.push_back(st);
  }
  write_trajectory_csv(dir.path() / "t.csv", std::span<const Trajectory>(&tr, 1), "prov");
  const auto text = testing::read_text(dir.path() / "t.csv");
  EXPECT_EQ(text.rfind("# prov\nepisode,t,tau,", 0), 0u);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2 + kRoundsPerEpisode);
}

}  // namespace
}  // namespace pvtrade
