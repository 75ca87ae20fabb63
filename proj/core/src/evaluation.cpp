#include "pvtrade/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "pvtrade/csv_io.hpp"
#include "pvtrade/errors.hpp"

namespace pvtrade {

void ScenarioConfig::validate() const {
  if (name.empty()) throw ConfigError("scenario.name", "must not be empty");
  if (name.find_first_of(",\n\"") != std::string::npos) {
    throw ConfigError("scenario.name", "must not contain commas, quotes or newlines");
  }
  if (!(liquidity_scale >= 0.0) || !std::isfinite(liquidity_scale)) {
    throw ConfigError("scenario.liquidity_scale", "must be a finite value >= 0");
  }
  if (!std::isfinite(imbalance_shift)) throw ConfigError("scenario.imbalance_shift", "must be finite");
  if (cvar_alpha && !(*cvar_alpha > 0.0 && *cvar_alpha < 1.0)) {
    throw ConfigError("scenario.cvar_alpha", "must be in (0, 1)");
  }
}

std::string to_string(AblationMode m) { return m == AblationMode::retrain ? "retrain" : "zero"; }

AblationMode ablation_mode_from_string(const std::string& s) {
  if (s == "retrain") return AblationMode::retrain;
  if (s == "zero") return AblationMode::zero;
  throw ConfigError("evaluation.ablation_mode", "expected retrain or zero, got '" + s + "'");
}

bool needs_retrain(const ScenarioConfig& s, AblationMode mode, ForecastHorizon default_horizon) {
  return (mode == AblationMode::retrain && !s.ablate.empty()) || s.horizon != default_horizon ||
         s.cvar_alpha.has_value();
}

StrategyRun run_strategy(const ModelInputs& inputs, std::span<const std::size_t> starts, const EnvConfig& env_config,
                         const Strategy& strategy, std::uint64_t draw_seed, bool keep_trajectories) {
  EnvConfig cfg = env_config;
  if (strategy.policy == nullptr) cfg.route_through_executor = false;
  Environment env(inputs.data, inputs.features, cfg);
  const auto box = action_box(cfg);
  const bool oracle = strategy.policy == nullptr && strategy.baseline.variant == BaselineVariant::oracle;

  StrategyRun run;
  run.daily_profit.reserve(starts.size());
  for (auto s : starts) {
    env.reset(s);
    double day = 0.0;
    Trajectory traj;
    while (!env.done()) {
      const MdpState st = env.state();
      const auto draws = matched_draws(draw_seed, st.hour);
      MdpAction a;
      if (strategy.policy != nullptr) {
        a = mean_action(*strategy.policy, env.observation(), box);
      } else if (oracle) {
        const auto f = env.foresight(draws);
        a = baseline_action(strategy.baseline, st, env.caps(), &f, cfg);
      } else {
        a = baseline_action(strategy.baseline, st, env.caps(), nullptr, cfg);
      }
      const auto out = env.step(a, draws);
      day += out.da_revenue + out.cash + out.settlement;
      run.da_revenue += out.da_revenue;
      if (out.traded) ++run.trades;
      if (keep_trajectories) traj.push_back({st, a, out});
    }
    run.daily_profit.push_back(day);
    run.profit += day;
    if (keep_trajectories) run.trajectories.push_back(std::move(traj));
  }
  return run;
}

double imbalance_sigma(const Dataset& data, std::size_t boundary) {
  boundary = std::min(boundary, data.size());
  if (boundary < 2) throw InputError("imbalance_sigma needs at least two training rows");
  double mean = 0.0;
  for (std::size_t t = 0; t < boundary; ++t) mean += data.market[t].p_im;
  mean /= static_cast<double>(boundary);
  double ss = 0.0;
  for (std::size_t t = 0; t < boundary; ++t) ss += (data.market[t].p_im - mean) * (data.market[t].p_im - mean);
  return std::sqrt(ss / static_cast<double>(boundary));
}

Dataset scenario_dataset(const Dataset& data, std::size_t boundary, const ScenarioConfig& s, double p_im_sigma) {
  Dataset out = data;
  const double shift = s.imbalance_shift * p_im_sigma;
  for (std::size_t t = boundary; t < out.size(); ++t) {
    auto& m = out.market[t];
    m.bid_depth *= s.liquidity_scale;
    m.ask_depth *= s.liquidity_scale;
    m.p_im += shift;
  }
  return out;
}

namespace {

double mean_of(std::span<const double> xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

}  // namespace

ScenarioResult run_scenario(const EvalSetup& setup, const ScenarioConfig& scenario,
                            std::span<const TrainedModel> models, bool keep_trajectories) {
  scenario.validate();
  if (models.empty()) throw InputError("run_scenario: no trained models");
  const double sigma = imbalance_sigma(*setup.data, setup.boundary);
  const Dataset data = scenario_dataset(*setup.data, setup.boundary, scenario, sigma);
  const auto starts = episode_starts_in(data, setup.boundary, data.size());
  if (starts.empty()) throw InputError("run_scenario: evaluation period holds no full day");

  ScenarioResult res;
  res.metrics.name = scenario.name;
  std::vector<double> fdrl, spot, cvars, trades;
  for (std::size_t k = 0; k < models.size(); ++k) {
    const auto& m = models[k];
    std::vector<AblationGroup> ablate = m.ablate;
    for (auto g : scenario.ablate) {
      if (std::find(ablate.begin(), ablate.end(), g) == ablate.end()) ablate.push_back(g);
    }
    const auto inputs = prepare_inputs(data, m.features, m.normalizer, ablate);
    const bool keep = keep_trajectories && k == 0;
    auto run = run_strategy(inputs, starts, setup.env, {&m.params, {}}, m.seed, keep);
    auto baseline = [&](BaselineVariant v) {
      return run_strategy(inputs, starts, setup.env, {nullptr, {v, setup.sign_spread_threshold}}, m.seed).profit;
    };
    SeedOutcome o;
    o.seed = m.seed;
    o.fdrl = run.profit;
    o.spot_only = baseline(BaselineVariant::spot_only);
    o.forecast_tracking = baseline(BaselineVariant::forecast_tracking);
    o.sign_spread = baseline(BaselineVariant::sign_spread);
    o.oracle = baseline(BaselineVariant::oracle);
    o.trades = run.trades;
    o.cvar = compute_cvar_daily(run.daily_profit, setup.cvar_level);
    res.per_seed.push_back(o);
    fdrl.push_back(o.fdrl / 1000.0);
    spot.push_back(o.spot_only / 1000.0);
    cvars.push_back(o.cvar / 1000.0);
    trades.push_back(o.trades);
    if (keep) res.trajectories = std::move(run.trajectories);
  }
  auto& r = res.metrics;
  r.profit_keur = mean_of(fdrl);
  r.ci95_keur = fdrl.size() >= 2 ? ci95_halfwidth(fdrl) : 0.0;
  r.spot_only_keur = mean_of(spot);
  r.uplift_keur = r.profit_keur - r.spot_only_keur;
  r.trades = mean_of(trades);
  r.cvar5_keur = mean_of(cvars);
  return res;
}

double compute_cvar_daily(std::span<const double> daily, double level) {
  if (daily.size() < 20) {
    throw InputError(fmt::format("CVaR of daily profits needs >= 20 days, got {}", daily.size()));
  }
  if (!(level > 0.0 && level <= 1.0)) throw InputError(fmt::format("CVaR level {} not in (0, 1]", level));
  std::vector<double> sorted(daily.begin(), daily.end());
  std::sort(sorted.begin(), sorted.end());
  auto k = static_cast<std::size_t>(std::ceil(level * static_cast<double>(sorted.size()) - 1e-9));
  k = std::clamp<std::size_t>(k, 1, sorted.size());
  return std::accumulate(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k), 0.0) /
         static_cast<double>(k);
}

double ci95_halfwidth(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 2) throw InputError("ci95_halfwidth needs at least two values");
  const double mean = mean_of(values);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  const boost::math::students_t dist(static_cast<double>(n - 1));
  return boost::math::quantile(dist, 0.975) * sd / std::sqrt(static_cast<double>(n));
}

namespace {

double nearest_rank(const std::vector<double>& sorted, double q) {
  auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size())));
  k = std::clamp<std::size_t>(k, 1, sorted.size());
  return sorted[k - 1];
}

}  // namespace

LatencyStats latency_benchmark(const PolicyParams& params, const ModelInputs& inputs,
                               std::span<const std::size_t> starts, const EnvConfig& env_config,
                               std::size_t n_steps, std::size_t warmup) {
  if (n_steps < kMinLatencySteps) {
    throw InputError(fmt::format("latency benchmark needs at least {} steps, got {}; fewer is statistically "
                                 "meaningless",
                                 kMinLatencySteps, n_steps));
  }
  if (starts.empty()) throw InputError("latency benchmark: no episodes");
  using clock = std::chrono::steady_clock;
  Environment env(inputs.data, inputs.features, env_config);
  const auto box = action_box(env_config);

  std::vector<double> lat;
  lat.reserve(n_steps + kRoundsPerEpisode);
  std::size_t done_warmup = 0, episodes = 0, ep_steps = 0, idx = 0;
  double episode_total_ms = 0.0;
  volatile double sink = 0.0;
  while (lat.size() < n_steps) {
    const bool measuring = done_warmup >= warmup;
    const auto s = starts[idx++ % starts.size()];
    const auto e0 = clock::now();
    env.reset(s);
    std::size_t steps = 0;
    while (!env.done()) {
      const auto draws = matched_draws(0, env.state().hour);
      const auto t0 = clock::now();
      const auto a = mean_action(params, env.observation(), box);
      const auto out = env.step(a, draws);
      const auto t1 = clock::now();
      sink = sink + out.reward;
      ++steps;
      if (measuring) {
        lat.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
      } else {
        ++done_warmup;
      }
    }
    const auto e1 = clock::now();
    if (measuring) {
      ++episodes;
      ep_steps += steps;
      episode_total_ms += std::chrono::duration<double, std::milli>(e1 - e0).count();
    }
  }
  LatencyStats st;
  st.n_steps = lat.size();
  st.warmup = done_warmup;
  st.mean_ms = mean_of(lat);
  std::sort(lat.begin(), lat.end());
  st.p50_ms = nearest_rank(lat, 0.50);
  st.p95_ms = nearest_rank(lat, 0.95);
  st.p99_ms = nearest_rank(lat, 0.99);
  st.p999_ms = nearest_rank(lat, 0.999);
  st.episode_ms = episode_total_ms / static_cast<double>(episodes);
  st.throughput = st.episode_ms > 0.0 ? 1000.0 / st.episode_ms : 0.0;
  st.steps_per_episode = static_cast<double>(ep_steps) / static_cast<double>(episodes);
  return st;
}

TradingPattern trading_pattern_report(std::span<const Trajectory> trajectories) {
  TradingPattern p;
  for (const auto& traj : trajectories) {
    for (const auto& step : traj) {
      const auto& o = step.outcome;
      if (!o.traded) continue;
      ++p.hourly_trades[static_cast<std::size_t>(hour_of_day(step.state.hour))];
      (o.order_type == OrderType::market ? p.market_orders : p.limit_orders) += 1;
      p.sizes.push_back(std::abs(o.executed));
    }
  }
  std::sort(p.sizes.begin(), p.sizes.end());
  const int n = p.market_orders + p.limit_orders;
  if (n > 0) {
    p.market_share = static_cast<double>(p.market_orders) / n;
    p.limit_share = static_cast<double>(p.limit_orders) / n;
    const std::size_t m = p.sizes.size();
    p.median_size = m % 2 == 1 ? p.sizes[m / 2] : 0.5 * (p.sizes[m / 2 - 1] + p.sizes[m / 2]);
    const auto bins = static_cast<std::size_t>(std::floor(p.sizes.back() / kSizeBinWidth)) + 1;
    p.size_histogram.assign(bins, 0);
    for (double s : p.sizes) ++p.size_histogram[static_cast<std::size_t>(std::floor(s / kSizeBinWidth))];
  }
  return p;
}

std::vector<WeightReportRow> weight_report(std::span<const PolicyParams> per_seed) {
  if (per_seed.empty()) return {};
  const int dims = per_seed.front().action_dim;
  const auto& reg = feature_registry();
  const double n = static_cast<double>(per_seed.size());
  std::vector<WeightReportRow> rows;
  for (int a = 0; a < dims; ++a) {
    const auto first = rows.size();
    for (std::size_t i = 0; i < kFeatureDim; ++i) {
      double mean = 0.0;
      for (const auto& p : per_seed) mean += p.weight(a, i);
      mean /= n;
      double ss = 0.0;
      for (const auto& p : per_seed) ss += (p.weight(a, i) - mean) * (p.weight(a, i) - mean);
      WeightReportRow r;
      r.action = a;
      r.feature = std::string(reg[i].name);
      r.mean = mean;
      r.std = per_seed.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
      rows.push_back(r);
    }
    std::stable_sort(rows.begin() + static_cast<std::ptrdiff_t>(first), rows.end(),
                     [](const WeightReportRow& l, const WeightReportRow& r) {
                       return std::abs(l.mean) > std::abs(r.mean);
                     });
    for (std::size_t k = first; k < rows.size(); ++k) rows[k].rank = static_cast<int>(k - first + 1);
  }
  return rows;
}

namespace {

std::ofstream open_csv(const std::filesystem::path& path, const std::string& provenance) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  if (!provenance.empty()) out << "# " << provenance << '\n';
  return out;
}

std::string num(double v) { return format_number(v); }

}  // namespace

void write_scenario_csv(const std::filesystem::path& path, std::span<const ScenarioResult> rows,
                        const std::string& provenance) {
  auto out = open_csv(path, provenance);
  out << "scenario,fdrl_keur,ci95_keur,spot_only_keur,uplift_keur,trades,cvar5_keur\n";
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    out << m.name << ',' << num(m.profit_keur) << ',' << num(m.ci95_keur) << ',' << num(m.spot_only_keur) << ','
        << num(m.uplift_keur) << ',' << num(m.trades) << ',' << num(m.cvar5_keur) << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

void write_seed_csv(const std::filesystem::path& path, std::span<const ScenarioResult> rows,
                    const std::string& provenance) {
  auto out = open_csv(path, provenance);
  out << "scenario,seed,fdrl_eur,spot_only_eur,forecast_tracking_eur,sign_spread_eur,oracle_eur,uplift_eur,"
         "trades,cvar5_eur\n";
  for (const auto& r : rows) {
    for (const auto& s : r.per_seed) {
      out << r.metrics.name << ',' << s.seed << ',' << num(s.fdrl) << ',' << num(s.spot_only) << ','
          << num(s.forecast_tracking) << ',' << num(s.sign_spread) << ',' << num(s.oracle) << ','
          << num(s.fdrl - s.spot_only) << ',' << s.trades << ',' << num(s.cvar) << '\n';
    }
  }
  if (!out) throw IoError("write failed: " + path.string());
}

void write_latency_csv(const std::filesystem::path& path, const LatencyStats& s, const std::string& provenance) {
  auto out = open_csv(path, provenance);
  out << "metric,value,unit\n";
  out << "steps," << s.n_steps << ",count\n";
  out << "warmup," << s.warmup << ",count\n";
  out << "mean," << num(s.mean_ms) << ",ms\n";
  out << "p50," << num(s.p50_ms) << ",ms\n";
  out << "p95," << num(s.p95_ms) << ",ms\n";
  out << "p99," << num(s.p99_ms) << ",ms\n";
  out << "p99.9," << num(s.p999_ms) << ",ms\n";
  out << "episode_time," << num(s.episode_ms) << ",ms\n";
  out << "throughput," << num(s.throughput) << ",episodes/s\n";
  out << "steps_per_episode," << num(s.steps_per_episode) << ",count\n";
  if (!out) throw IoError("write failed: " + path.string());
}

void write_weights_csv(const std::filesystem::path& path, std::span<const WeightReportRow> rows,
                       const std::string& provenance) {
  auto out = open_csv(path, provenance);
  out << "rank,action,feature,weight,std\n";
  for (const auto& r : rows) {
    out << r.rank << ',' << action_name(r.action) << ',' << r.feature << ',' << num(r.mean) << ',' << num(r.std)
        << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

void write_curve_csv(const std::filesystem::path& path, std::span<const CurvePoint> points,
                     const std::string& provenance) {
  auto out = open_csv(path, provenance);
  out << "epoch,seed,mean_return,policy_loss,value_loss\n";
  for (const auto& p : points) {
    out << p.epoch << ',' << p.seed << ',' << num(p.mean_return) << ',' << num(p.policy_loss) << ','
        << num(p.value_loss) << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

void write_pattern_csv(const std::filesystem::path& path, const TradingPattern& p, const std::string& provenance) {
  auto out = open_csv(path, provenance);
  out << "section,key,value\n";
  for (std::size_t h = 0; h < p.hourly_trades.size(); ++h) out << "hour," << h << ',' << p.hourly_trades[h] << '\n';
  out << "order_type,market," << num(p.market_share) << '\n';
  out << "order_type,limit," << num(p.limit_share) << '\n';
  for (std::size_t b = 0; b < p.size_histogram.size(); ++b) {
    out << "size_bin," << num(static_cast<double>(b) * kSizeBinWidth) << ',' << p.size_histogram[b] << '\n';
  }
  out << "median_size,mwh," << (p.median_size ? num(*p.median_size) : std::string("NaN")) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace pvtrade
