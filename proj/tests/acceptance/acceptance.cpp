// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "app.hpp"
#include "pvtrade/baselines.hpp"
#include "pvtrade/config.hpp"
#include "pvtrade/evaluation.hpp"
#include "pvtrade/execution.hpp"
#include "pvtrade/features.hpp"
#include "pvtrade/policy.hpp"
#include "pvtrade/training.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace pvtrade;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmtd(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// Objective written out independently of the executor.
double objective(double qa, double qb, const PeriodInputs& in, const ExecParams& p) {
  const double e = in.g_hat - in.g_da - qa + qb;
  const double v = qa + qb;
  const double tr = qa - qb - in.a_rec;
  return in.p_bid * qa - in.p_ask * qb + in.p_im * e - p.alpha / 2 * v * v - p.beta / 2 * e * e -
         p.kappa / 2 * tr * tr;
}

Verdict executor_exactness() {
  const auto t0 = Clock::now();
  testing::Gen g(1001);
  double worst_obj = 0.0, worst_q = 0.0;
  for (int i = 0; i < 1000; ++i) {
    PeriodInputs in;
    const double mid = g.uniform(-20, 150);
    const double half = g.uniform(0, 6);
    in.p_bid = mid - half;
    in.p_ask = mid + half;
    in.p_im = mid + g.normal() * 20;
    in.g_da = g.uniform(0, 8);
    in.g_hat = std::max(0.0, in.g_da + g.normal() * 2);
    in.g_act = std::max(0.0, in.g_hat + g.normal());
    in.depth_ask_cap = g.uniform(0, 6);
    in.depth_buy_cap = g.uniform(0, 6);
    in.a_rec = g.normal() * 3;
    ExecParams p;
    p.alpha = g.uniform(0.05, 2);
    p.beta = g.uniform(0.05, 2);
    p.kappa = g.uniform(0, 5);

    const double ua = std::min(std::max(in.g_hat - in.g_da, 0.0), in.depth_ask_cap);
    const double ub = std::min(std::max(in.g_da - in.g_hat, 0.0), in.depth_buy_cap);
    double best = -std::numeric_limits<double>::infinity(), best_net = 0.0;
    auto consider = [&](double qa, double qb) {
      const double v = objective(qa, qb, in, p);
      if (v > best) {
        best = v;
        best_net = qa - qb;
      }
    };
    for (int side = 0; side < 2; ++side) {
      const double cap = side == 1 ? ua : ub;
      const auto n = static_cast<long>(std::floor(cap / 1e-3));
      for (long k = 0; k <= n; ++k) {
        const double q = static_cast<double>(k) * 1e-3;
        side == 1 ? consider(q, 0.0) : consider(0.0, q);
      }
      side == 1 ? consider(cap, 0.0) : consider(0.0, cap);
    }
    const auto r = execute_period(in, p);
    worst_obj = std::max(worst_obj, std::abs(objective(r.q_ask, r.q_buy, in, p) - best));
    worst_q = std::max(worst_q, std::abs(r.net() - best_net));
  }
  const double secs = seconds_since(t0);
  return {worst_obj <= 1e-2 && worst_q <= 1e-3 && secs < 10.0,
          "max |dq|=" + fmtd(worst_q) + " max |dobj|=" + fmtd(worst_obj) + " time=" + fmtd(secs) + "s"};
}

Verdict gradient_correctness() {
  testing::Gen g(1002);
  const double h = 1e-5;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    auto p = PolicyParams::zeros(2);
    for (auto& w : p.W) w = g.normal() * 0.3;
    for (auto& s : p.log_sigma) s = g.uniform(-1.5, 1.0);
    for (auto& v : p.v) v = g.normal();
    FeatureVector x;
    for (auto& v : x) v = g.normal();
    x[kIntercept] = 1.0;
    ActionVector a = mean_raw(p, x);
    for (int k = 0; k < 2; ++k) a[k] += g.normal() * p.sigma(k) * 1.5;

    std::vector<double> gW(p.W.size()), gls(p.log_sigma.size());
    add_log_prob_grad(p, x, a, 1.0, gW, gls);
    auto rel = [](double fd, double an) { return std::abs(fd - an) / std::max(1.0, std::abs(an)); };
    auto fd_of = [&](double& param, const std::function<double()>& f) {
      const double keep = param;
      param = keep + h;
      const double up = f();
      param = keep - h;
      const double dn = f();
      param = keep;
      return (up - dn) / (2 * h);
    };
    auto lp = [&] { return log_prob(p, x, a); };
    auto val = [&] { return value(p, x); };
    for (std::size_t i = 0; i < p.W.size(); ++i) worst = std::max(worst, rel(fd_of(p.W[i], lp), gW[i]));
    for (std::size_t i = 0; i < p.log_sigma.size(); ++i) {
      worst = std::max(worst, rel(fd_of(p.log_sigma[i], lp), gls[i]));
    }
    for (std::size_t i = 0; i < kFeatureDim; ++i) worst = std::max(worst, rel(fd_of(p.v[i], val), x[i]));
  }
  return {worst <= 1e-5, "max relative error=" + fmtd(worst)};
}

double grid_cvar(std::span<const double> r, double alpha) {
  double best = -std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 12000; ++k) best = std::max(best, cvar_objective(r, alpha, k * 1e-3));
  return best;
}

Verdict gae_cvar_oracles() {
  testing::Gen g(1003);
  double worst_gae = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto n = static_cast<std::size_t>(g.integer(1, 40));
    std::vector<double> r(n), v(n + 1);
    for (auto& x : r) x = g.normal() * 10;
    for (auto& x : v) x = g.normal() * 10;
    const double gamma = g.uniform(0.5, 1.0);
    const auto out = compute_gae(r, v, gamma, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
      worst_gae = std::max(worst_gae, std::abs(out.advantages[t] - (r[t] + gamma * v[t + 1] - v[t])));
    }
  }
  std::vector<double> ret(10);
  std::iota(ret.begin(), ret.end(), 1.0);
  const double c90 = cvar_shaping(ret, 0.9).cvar, c50 = cvar_shaping(ret, 0.5).cvar;
  const double g90 = grid_cvar(ret, 0.9), g50 = grid_cvar(ret, 0.5);
  const bool ok = worst_gae <= 1e-9 && std::abs(c90 - 1.0) <= 1e-9 && std::abs(c50 - 3.0) <= 1e-9 &&
                  std::abs(g90 - 1.0) <= 1e-9 && std::abs(g50 - 3.0) <= 1e-9;
  return {ok, "gae max err=" + fmtd(worst_gae) + " cvar0.9=" + fmtd(c90) + " (grid " + fmtd(g90) + ") cvar0.5=" +
                  fmtd(c50) + " (grid " + fmtd(g50) + ")"};
}

struct PipelineOut {
  std::vector<TrainedModel> models;
  std::vector<ScenarioResult> scenarios;
  std::vector<WeightReportRow> weights;
  double train_secs = 0.0;
};

PipelineOut run_pipeline(const AppConfig& config, const fs::path& out) {
  PipelineOut r;
  app::cmd_generate(config, config.data.seed, out / "data");
  app::RunOptions opt;
  opt.out = out;
  opt.data = out / "data";
  const auto t0 = Clock::now();
  r.models = app::cmd_train(config, opt);
  r.train_secs = seconds_since(t0);
  r.scenarios = app::cmd_evaluate(config, opt);
  r.weights = app::cmd_report(config, opt);
  return r;
}

Verdict convergence(const PipelineOut& p) {
  std::map<int, std::vector<double>> by_epoch;
  for (const auto& m : p.models) {
    for (const auto& c : m.curve) by_epoch[c.epoch].push_back(c.mean_return);
  }
  auto mean_at = [&](int e) {
    const auto& v = by_epoch.at(e);
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  if (!by_epoch.count(1) || !by_epoch.count(6)) return {false, "curve lacks epochs 1..6"};
  const double early = mean_at(2) - mean_at(1), late = mean_at(6) - mean_at(5);
  const bool ok = std::abs(late) < 0.1 * std::abs(early) && p.train_secs < 900.0;
  std::string curve;
  for (int e = 1; e <= 6; ++e) curve += (e > 1 ? "," : "") + fmtd(mean_at(e));
  return {ok, "mean curve [" + curve + "] |d56|=" + fmtd(std::abs(late)) + " |d12|=" + fmtd(std::abs(early)) +
                  " train=" + fmtd(p.train_secs) + "s"};
}

const ScenarioResult* find_cell(const PipelineOut& p, const std::string& name) {
  for (const auto& s : p.scenarios) {
    if (s.metrics.name == name) return &s;
  }
  return nullptr;
}

Verdict benchmark_ordering(const PipelineOut& p) {
  const auto* b = find_cell(p, "Baseline");
  if (!b) return {false, "no Baseline cell"};
  bool ordered = true;
  int positive = 0;
  std::string detail;
  for (const auto& o : b->per_seed) {
    ordered = ordered && o.oracle >= o.fdrl && o.fdrl >= o.spot_only;
    positive += o.fdrl - o.spot_only > 0.0;
    detail += " seed" + std::to_string(o.seed) + ":uplift=" + fmtd((o.fdrl - o.spot_only) / 1e3) + "k";
  }
  return {ordered && positive >= 4, "ordered=" + std::string(ordered ? "yes" : "no") + " positive=" +
                                        std::to_string(positive) + "/" + std::to_string(b->per_seed.size()) + detail};
}

Verdict scenario_directionality(const PipelineOut& p) {
  const auto* lo = find_cell(p, "Imbalance -1 sigma");
  const auto* mid = find_cell(p, "Baseline");
  const auto* hi = find_cell(p, "Imbalance +1 sigma");
  if (!lo || !mid || !hi) return {false, "missing imbalance cells"};
  const double u_lo = lo->metrics.uplift_keur, u_mid = mid->metrics.uplift_keur, u_hi = hi->metrics.uplift_keur;
  const bool imb = u_lo >= u_mid && u_mid >= u_hi;

  bool liq = true;
  std::string liq_s;
  for (const char* n : {"Liquidity 0.25", "Liquidity 0.50", "Liquidity 1.00"}) {
    const auto* c = find_cell(p, n);
    liq = liq && c && c->metrics.uplift_keur > 0.0;
    liq_s += " " + fmtd(c ? c->metrics.uplift_keur : std::nan(""));
  }

  std::vector<double> cv;
  for (const char* n : {"CVaR 0.70", "CVaR 0.90", "CVaR 0.95"}) {
    const auto* c = find_cell(p, n);
    if (c) cv.push_back(c->metrics.profit_keur);
  }
  bool cvar = cv.size() == 3;
  double spread = std::nan("");
  if (cvar) {
    const auto [mn, mx] = std::minmax_element(cv.begin(), cv.end());
    spread = (*mx - *mn) / std::abs(std::accumulate(cv.begin(), cv.end(), 0.0) / 3.0);
    cvar = spread < 0.02;
  }
  return {imb && liq && cvar, "imbalance uplift -1/0/+1 sigma=" + fmtd(u_lo) + "/" + fmtd(u_mid) + "/" +
                                  fmtd(u_hi) + "k (" + (imb ? "ordered" : "NOT ordered") + "); liquidity uplift" +
                                  liq_s + "k; cvar profit spread=" + fmtd(spread * 100) + "%"};
}

Verdict latency(const AppConfig& config, const fs::path& out) {
  app::RunOptions opt;
  opt.out = out;
  opt.data = out / "data";
  opt.steps = 100000;
  const auto s = app::cmd_bench(config, opt);
  const bool ok = s.n_steps >= 100000 && s.mean_ms < 1.0 && s.p99_ms < 5.0 && s.steps_per_episode == 24.0;
  return {ok, "steps=" + std::to_string(s.n_steps) + " mean=" + fmtd(s.mean_ms) + "ms p99=" + fmtd(s.p99_ms) +
                  "ms steps/episode=" + fmtd(s.steps_per_episode)};
}

Verdict determinism(const fs::path& a, const fs::path& b) {
  std::vector<std::string> names;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file() || e.path().extension() != ".csv") continue;
    if (e.path().filename() == "latency.csv") continue;  // wall-clock timings
    names.push_back(fs::relative(e.path(), a).string());
  }
  std::sort(names.begin(), names.end());
  std::vector<std::string> differ;
  for (const auto& n : names) {
    if (!fs::exists(b / n) || testing::read_text(a / n) != testing::read_text(b / n)) differ.push_back(n);
  }
  std::string d = std::to_string(names.size()) + " csv files compared";
  for (const auto& n : differ) d += "; differs: " + n;
  return {!names.empty() && differ.empty(), d};
}

Verdict no_lookahead(const Dataset& base, std::size_t boundary) {
  testing::Gen g(1009);
  int feature_fail = 0, baseline_fail = 0;
  const auto in = prepare_inputs(base, {}, boundary);
  Environment env0(in.data, in.features, EnvConfig{});
  const auto starts = env0.episode_starts();
  for (int trial = 0; trial < 100; ++trial) {
    const auto day = starts[static_cast<std::size_t>(g.integer(0, static_cast<int>(starts.size()) - 2))];
    const auto k = static_cast<std::size_t>(g.integer(0, kRoundsPerEpisode - 1));
    const std::size_t t = day + k;
    auto d = base;
    d.pv[t].g_act = g.uniform(0, 10);
    d.pv[t].ghi += g.uniform(0, 200);
    d.pv[t].cloud_cover = g.uniform(0, 1);
    d.market[t].p_im += g.normal() * 50;
    d.market[t].regulation_state = static_cast<RegulationState>(g.integer(0, 2));
    for (std::size_t r = t + 1; r < std::min(d.size(), t + 72); ++r) {
      auto& m = d.market[r];
      auto& pv = d.pv[r];
      m.p_da += g.normal() * 20;
      m.p_id_bid += g.normal() * 5;
      m.p_id_ask = m.p_id_bid + g.uniform(0, 8);
      m.p_im += g.normal() * 50;
      m.bid_depth = g.uniform(0, 40);
      m.ask_depth = g.uniform(0, 40);
      pv.g_act = g.uniform(0, 10);
      pv.forecast_1h = g.uniform(0, 10);
      pv.forecast_5h = g.uniform(0, 10);
      pv.forecast_da = g.uniform(0, 10);
      pv.g_da = g.uniform(0, 10);
      pv.ghi = g.uniform(0, 900);
    }
    if (build_features(base, t) != build_features(d, t)) ++feature_fail;

    const auto in2 = prepare_inputs(d, {}, in.normalizer);
    Environment e1(in.data, in.features, EnvConfig{}), e2(in2.data, in2.features, EnvConfig{});
    e1.reset(day);
    e2.reset(day);
    for (std::size_t j = 0; j < k; ++j) {
      e1.step({}, {});
      e2.step({}, {});
    }
    for (auto v : {BaselineVariant::spot_only, BaselineVariant::forecast_tracking, BaselineVariant::sign_spread}) {
      const auto a1 = baseline_action({v}, e1.state(), e1.caps(), nullptr, EnvConfig{});
      const auto a2 = baseline_action({v}, e2.state(), e2.caps(), nullptr, EnvConfig{});
      if (a1.q != a2.q || a1.delta != a2.delta) {
        ++baseline_fail;
        break;
      }
    }
  }
  return {feature_fail == 0 && baseline_fail == 0, "100 trials: feature violations=" +
                                                       std::to_string(feature_fail) + " baseline violations=" +
                                                       std::to_string(baseline_fail)};
}

Verdict interpretability(const PipelineOut& p, const fs::path& out) {
  const auto csv = testing::read_text(out / "weights.csv");
  const bool shaped = csv.find("rank,action,feature,weight,std") != std::string::npos &&
                      p.weights.size() == 2 * kFeatureDim;
  auto rows = p.weights;
  std::sort(rows.begin(), rows.end(),
            [](const auto& a, const auto& b) { return std::abs(a.mean) > std::abs(b.mean); });
  double worst = 0.0;
  std::string top;
  for (std::size_t i = 0; i < 5 && i < rows.size(); ++i) {
    worst = std::max(worst, rows[i].std);
    top += " " + action_name(rows[i].action) + ":" + rows[i].feature + "=" + fmtd(rows[i].mean) + "+-" +
           fmtd(rows[i].std);
  }
  return {shaped && worst < 0.1, "top5" + top + "; max std=" + fmtd(worst)};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::warn);
  std::vector<std::pair<std::string, Verdict>> results;
  auto record = [&](const std::string& name, const std::function<Verdict()>& f) {
    const auto t0 = Clock::now();
    Verdict v;
    try {
      v = f();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    std::printf("[%s] %s: %s (%.1fs)\n", v.pass ? "PASS" : "FAIL", name.c_str(), v.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
    results.emplace_back(name, v);
  };

  record("1 executor exactness", executor_exactness);
  record("2 gradient correctness", gradient_correctness);
  record("3 GAE/CVaR oracles", gae_cvar_oracles);

  const auto config = load_config(fs::path(PVTRADE_SOURCE_DIR) / "configs" / "default.json");
  testing::TempDir run_a("accept_a"), run_b("accept_b");
  PipelineOut first, second;
  std::string pipeline_error;
  try {
    first = run_pipeline(config, run_a.path());
  } catch (const std::exception& e) {
    pipeline_error = e.what();
  }
  auto needs_pipeline = [&](const std::function<Verdict()>& f) {
    return [&, f] { return pipeline_error.empty() ? f() : Verdict{false, "pipeline failed: " + pipeline_error}; };
  };

  record("4 convergence", needs_pipeline([&] { return convergence(first); }));
  record("5 benchmark ordering", needs_pipeline([&] { return benchmark_ordering(first); }));
  record("6 scenario directionality", needs_pipeline([&] { return scenario_directionality(first); }));
  record("7 latency", needs_pipeline([&] { return latency(config, run_a.path()); }));
  record("8 determinism", needs_pipeline([&] {
           second = run_pipeline(config, run_b.path());
           return determinism(run_a.path(), run_b.path());
         }));
  record("9 no-lookahead", [&] {
    const auto data = generate_synthetic_dataset(config.data.generator, config.data.seed);
    return no_lookahead(data, app::split_row(data, config));
  });
  record("10 interpretability", needs_pipeline([&] { return interpretability(first, run_a.path()); }));

  int failed = 0;
  for (const auto& [name, v] : results) failed += !v.pass;
  std::printf("%d/%zu criteria passed\n", static_cast<int>(results.size()) - failed, results.size());
  return failed == 0 ? 0 : 1;
}
